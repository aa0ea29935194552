use nalgebra::DVector;

use super::{GridGeometry, LinearOperator};
use crate::error::{Error, Result};

/// Stacked forward differences `[D_x; D_y]` with a zero row at the last
/// column (for `D_x`) and the last row (for `D_y`).
#[derive(Debug, Clone, Copy)]
pub struct FiniteDifference2d {
    geom: GridGeometry,
}

pub fn finite_difference_2d(geom: GridGeometry) -> Result<FiniteDifference2d> {
    if geom.nx < 2 || geom.ny < 2 {
        return Err(Error::DegenerateGeometry(format!(
            "finite differences need at least a 2x2 grid, got {}x{}",
            geom.ny, geom.nx
        )));
    }
    Ok(FiniteDifference2d { geom })
}

impl LinearOperator for FiniteDifference2d {
    fn nrows(&self) -> usize {
        2 * self.geom.len()
    }
    fn ncols(&self) -> usize {
        self.geom.len()
    }
    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let g = self.geom;
        let n = g.len();
        let mut out = DVector::zeros(2 * n);
        for r in 0..g.ny {
            for c in 0..g.nx {
                let i = g.index(r, c);
                if c + 1 < g.nx {
                    out[i] = x[i + 1] - x[i];
                }
                if r + 1 < g.ny {
                    out[n + i] = x[i + g.nx] - x[i];
                }
            }
        }
        out
    }
    fn matvec_t(&self, y: &DVector<f64>) -> DVector<f64> {
        let g = self.geom;
        let n = g.len();
        let mut out = DVector::zeros(n);
        for r in 0..g.ny {
            for c in 0..g.nx {
                let i = g.index(r, c);
                if c + 1 < g.nx {
                    out[i + 1] += y[i];
                    out[i] -= y[i];
                }
                if r + 1 < g.ny {
                    out[i + g.nx] += y[n + i];
                    out[i] -= y[n + i];
                }
            }
        }
        out
    }
}
