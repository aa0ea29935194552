//! Straight-ray travel-time tomography on the unit square.
//!
//! Sources sit equispaced on the right edge (x = 1). Receivers are spread
//! along the left edge (x = 0) and the top edge (y = 1); by default the split
//! is proportional to edge length, i.e. half on each. Row `i * n_r + k` of the
//! operator holds the intersection length of the ray from source `i` to
//! receiver `k` with every pixel.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{GridGeometry, LinearOperator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomoLayout {
    pub n_sources: usize,
    pub n_receivers: usize,
    /// Fraction of receivers placed on the left edge; the rest go on top.
    pub left_fraction: f64,
}

impl TomoLayout {
    pub fn new(n_sources: usize, n_receivers: usize) -> Self {
        Self {
            n_sources,
            n_receivers,
            left_fraction: 0.5,
        }
    }

    pub fn sources(&self) -> Vec<Point> {
        let ns = self.n_sources as f64;
        (0..self.n_sources)
            .map(|i| Point {
                x: 1.0,
                y: (i as f64 + 0.5) / ns,
            })
            .collect()
    }

    pub fn receivers(&self) -> Vec<Point> {
        let n_left = ((self.left_fraction * self.n_receivers as f64).round() as usize)
            .min(self.n_receivers);
        let n_top = self.n_receivers - n_left;
        let left = (0..n_left).map(|k| Point {
            x: 0.0,
            y: (k as f64 + 0.5) / n_left as f64,
        });
        let top = (0..n_top).map(|k| Point {
            x: (k as f64 + 0.5) / n_top as f64,
            y: 1.0,
        });
        left.chain(top).collect()
    }
}

/// Sparse ray-by-pixel matrix in compressed row form.
#[derive(Debug, Clone)]
pub struct TomoOperator {
    geom: GridGeometry,
    layout: TomoLayout,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

pub fn build_tomo_operator(geom: GridGeometry, n_s: usize, n_r: usize) -> Result<TomoOperator> {
    build_tomo_operator_with(geom, TomoLayout::new(n_s, n_r))
}

pub fn build_tomo_operator_with(geom: GridGeometry, layout: TomoLayout) -> Result<TomoOperator> {
    if geom.is_empty() {
        return Err(Error::DegenerateGeometry("zero-size grid".into()));
    }
    if layout.n_sources == 0 || layout.n_receivers == 0 {
        return Err(Error::DegenerateGeometry(
            "need at least one source and one receiver".into(),
        ));
    }
    if !(0.0..=1.0).contains(&layout.left_fraction) {
        return Err(Error::invalid("left_fraction", "must lie in [0, 1]"));
    }
    let sources = layout.sources();
    let receivers = layout.receivers();
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for s in &sources {
        for r in &receivers {
            for (col, len) in trace_ray(geom, *s, *r) {
                col_idx.push(col);
                values.push(len);
            }
            row_ptr.push(col_idx.len());
        }
    }
    Ok(TomoOperator {
        geom,
        layout,
        row_ptr,
        col_idx,
        values,
    })
}

/// Pixel intersection lengths of the segment `a -> b`, found by sorting the
/// segment parameters where it crosses grid lines.
fn trace_ray(geom: GridGeometry, a: Point, b: Point) -> BTreeMap<usize, f64> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let length = (dx * dx + dy * dy).sqrt();
    let mut ts = vec![0.0, 1.0];
    let crossings = |start: f64, delta: f64, cells: usize, out: &mut Vec<f64>| {
        if delta.abs() > 0.0 {
            for k in 0..=cells {
                let t = (k as f64 / cells as f64 - start) / delta;
                if t > 0.0 && t < 1.0 {
                    out.push(t);
                }
            }
        }
    };
    crossings(a.x, dx, geom.nx, &mut ts);
    crossings(a.y, dy, geom.ny, &mut ts);
    ts.sort_by(f64::total_cmp);

    let mut row = BTreeMap::new();
    for w in ts.windows(2) {
        let dt = w[1] - w[0];
        if dt <= 1e-15 {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let (xm, ym) = (a.x + tm * dx, a.y + tm * dy);
        if !(0.0..=1.0).contains(&xm) || !(0.0..=1.0).contains(&ym) {
            continue;
        }
        let col = ((xm * geom.nx as f64) as usize).min(geom.nx - 1);
        let r = ((ym * geom.ny as f64) as usize).min(geom.ny - 1);
        *row.entry(geom.index(r, col)).or_insert(0.0) += dt * length;
    }
    row
}

impl TomoOperator {
    pub fn geometry(&self) -> GridGeometry {
        self.geom
    }

    pub fn layout(&self) -> TomoLayout {
        self.layout
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }
}

impl LinearOperator for TomoOperator {
    fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }
    fn ncols(&self) -> usize {
        self.geom.len()
    }
    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.nrows(), |i, _| self.row(i).map(|(j, v)| v * x[j]).sum())
    }
    fn matvec_t(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols());
        for i in 0..self.nrows() {
            let yi = y[i];
            for (j, v) in self.row(i) {
                out[j] += v * yi;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Liang-Barsky clip of segment `a -> b` against an axis-aligned box.
    fn clipped_length(a: Point, b: Point, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (p, q) in [
            (-dx, a.x - x0),
            (dx, x1 - a.x),
            (-dy, a.y - y0),
            (dy, y1 - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return 0.0;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        ((t1 - t0).max(0.0)) * (dx * dx + dy * dy).sqrt()
    }

    #[test]
    fn matches_box_clipping_oracle() {
        let g = GridGeometry::square(4).unwrap();
        let layout = TomoLayout::new(2, 2);
        let op = build_tomo_operator_with(g, layout).unwrap();
        let dense = op.to_dense();
        let (sources, receivers) = (layout.sources(), layout.receivers());
        for (i, s) in sources.iter().enumerate() {
            for (k, r) in receivers.iter().enumerate() {
                for row in 0..4 {
                    for col in 0..4 {
                        let expect = clipped_length(
                            *s,
                            *r,
                            col as f64 / 4.0,
                            (col + 1) as f64 / 4.0,
                            row as f64 / 4.0,
                            (row + 1) as f64 / 4.0,
                        );
                        let got = dense[(i * 2 + k, g.index(row, col))];
                        assert!((expect - got).abs() < 1e-12, "ray ({i},{k}) pixel ({row},{col})");
                    }
                }
            }
        }
    }

    #[test]
    fn horizontal_ray_crosses_full_width() {
        // One source and one left receiver at the same height.
        let g = GridGeometry::new(7, 4).unwrap();
        let layout = TomoLayout {
            n_sources: 1,
            n_receivers: 1,
            left_fraction: 1.0,
        };
        let op = build_tomo_operator_with(g, layout).unwrap();
        let row: Vec<_> = op.row(0).collect();
        assert_eq!(row.len(), 7);
        let total: f64 = row.iter().map(|(_, v)| v).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_chord_length_and_are_nonempty() {
        let g = GridGeometry::new(9, 6).unwrap();
        let layout = TomoLayout::new(5, 8);
        let op = build_tomo_operator_with(g, layout).unwrap();
        assert_eq!(op.nrows(), 40);
        for (i, s) in layout.sources().iter().enumerate() {
            for (k, r) in layout.receivers().iter().enumerate() {
                let chord = ((s.x - r.x).powi(2) + (s.y - r.y).powi(2)).sqrt();
                let row: Vec<_> = op.row(i * 8 + k).collect();
                assert!(!row.is_empty());
                assert!(row.iter().all(|(_, v)| *v >= 0.0));
                let total: f64 = row.iter().map(|(_, v)| v).sum();
                assert!((total - chord).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn receiver_split_is_configurable() {
        let layout = TomoLayout {
            n_sources: 1,
            n_receivers: 10,
            left_fraction: 0.3,
        };
        let rec = layout.receivers();
        assert_eq!(rec.iter().filter(|p| p.x == 0.0).count(), 3);
        assert_eq!(rec.iter().filter(|p| p.y == 1.0).count(), 7);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let g = GridGeometry::square(4).unwrap();
        assert!(build_tomo_operator(g, 0, 3).is_err());
        assert!(build_tomo_operator(g, 3, 0).is_err());
        let bad = GridGeometry { nx: 0, ny: 4 };
        assert!(build_tomo_operator(bad, 2, 2).is_err());
    }
}
