//! Cubic radial basis function interpolant with a polynomial tail.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::lstsq;

/// Points closer than this are merged before refitting a singular system.
const DEDUPE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RbfModel {
    centers: Vec<Vec<f64>>,
    weights: DVector<f64>,
    /// Constant term followed by linear coefficients when the tail is linear.
    tail: DVector<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

impl RbfModel {
    /// Interpolate `values` at `points`. The tail is linear when there are
    /// enough points to determine it and constant otherwise.
    pub fn fit(points: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::invalid("rbf samples", "need as many values as points, at least one"));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("rbf samples", "points have inconsistent dimension"));
        }
        if let Some(model) = Self::solve(points, values, false) {
            return Ok(model);
        }
        let (pts, vals) = dedupe(points, values);
        if let Some(model) = Self::solve(&pts, &vals, false) {
            return Ok(model);
        }
        Ok(Self::solve(&pts, &vals, true).expect("least-squares fallback always succeeds"))
    }

    fn solve(points: &[Vec<f64>], values: &[f64], least_squares: bool) -> Option<Self> {
        let k = points.len();
        let dim = points[0].len();
        let tail_len = if k > dim { dim + 1 } else { 1 };
        let size = k + tail_len;
        let mut sys = DMatrix::zeros(size, size);
        for i in 0..k {
            for j in 0..i {
                let phi = dist(&points[i], &points[j]).powi(3);
                sys[(i, j)] = phi;
                sys[(j, i)] = phi;
            }
            sys[(i, k)] = 1.0;
            sys[(k, i)] = 1.0;
            for d in 1..tail_len {
                sys[(i, k + d)] = points[i][d - 1];
                sys[(k + d, i)] = points[i][d - 1];
            }
        }
        let mut rhs = DVector::zeros(size);
        rhs.rows_mut(0, k).copy_from_slice(values);
        let sol = if least_squares {
            lstsq(&sys, &rhs, 1e-13)
        } else {
            let sol = sys.clone().lu().solve(&rhs)?;
            let resid = (&sys * &sol - &rhs).amax();
            let scale = rhs.amax().max(1.0);
            if !sol.iter().all(|v| v.is_finite()) || resid > 1e-9 * scale {
                return None;
            }
            sol
        };
        Some(Self {
            centers: points.to_vec(),
            weights: sol.rows(0, k).into_owned(),
            tail: sol.rows(k, tail_len).into_owned(),
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut s = self.tail[0];
        for (d, xd) in x.iter().enumerate().take(self.tail.len() - 1) {
            s += self.tail[d + 1] * xd;
        }
        for (c, w) in self.centers.iter().zip(self.weights.iter()) {
            s += w * dist(c, x).powi(3);
        }
        s
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }
}

fn dedupe(points: &[Vec<f64>], values: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut pts: Vec<Vec<f64>> = Vec::new();
    let mut vals = Vec::new();
    for (p, v) in points.iter().zip(values) {
        if pts.iter().all(|q| dist(p, q) > DEDUPE_TOL) {
            pts.push(p.clone());
            vals.push(*v);
        }
    }
    (pts, vals)
}
