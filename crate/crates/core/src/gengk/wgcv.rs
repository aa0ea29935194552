//! Weighted generalized cross validation on the projected problem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GenGkState;
use crate::error::{Error, Result};
use crate::optim::grid_then_brent;

/// Singular values below this are treated as zero.
const DEGENERATE_SIGMA: f64 = 1e-14;

/// SVD of `B_k` together with the data projected on its left singular vectors.
#[derive(Debug, Clone)]
pub struct ProjectedSvd {
    pub sigma: DVector<f64>,
    /// Right singular vectors as columns (`k x k`).
    pub z: DMatrix<f64>,
    /// `W^T (beta_1 e_1)` for the thin left factor `W`.
    pub bhat: DVector<f64>,
    /// `||beta_1 e_1||^2 - ||bhat||^2`: the part of the data outside `range(B_k)`.
    pub outside: f64,
    pub beta1: f64,
}

impl ProjectedSvd {
    pub fn new(state: &GenGkState) -> Self {
        Self::from_bidiagonal(&state.bidiagonal(), state.beta1())
    }

    /// SVD of any `(k+1) x k` projected matrix with data `beta1 e_1`.
    pub fn from_bidiagonal(b: &DMatrix<f64>, beta1: f64) -> Self {
        let svd = b.clone().svd(true, true);
        let w = svd.u.expect("requested");
        let z = svd.v_t.expect("requested").transpose();
        let bhat = w.row(0).transpose() * beta1;
        let outside = (beta1 * beta1 - bhat.norm_squared()).max(0.0);
        Self {
            sigma: svd.singular_values,
            z,
            bhat,
            outside,
            beta1,
        }
    }

    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.max()
    }

    /// `||B_k y_lambda - beta_1 e_1||^2`.
    pub fn residual_sq(&self, lambda: f64) -> f64 {
        self.sigma
            .iter()
            .zip(self.bhat.iter())
            .map(|(s, b)| (lambda / (s * s + lambda) * b).powi(2))
            .sum::<f64>()
            + self.outside
    }
}

/// Search interval for the regularization parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WgcvBounds {
    pub lower: f64,
    pub upper: f64,
    /// Bounds are multiples of the largest squared singular value of `B_k`.
    pub relative: bool,
}

impl Default for WgcvBounds {
    fn default() -> Self {
        Self {
            lower: 1e-12,
            upper: 1e2,
            relative: true,
        }
    }
}

impl WgcvBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.lower > 0.0 && self.upper > self.lower && self.upper.is_finite()) {
            return Err(Error::invalid(
                "wgcv bounds",
                format!("need 0 < lower < upper, got [{}, {}]", self.lower, self.upper),
            ));
        }
        Ok(())
    }

    pub fn resolve(&self, sigma_max: f64) -> (f64, f64) {
        if self.relative {
            let s2 = if sigma_max > 0.0 { sigma_max * sigma_max } else { 1.0 };
            (self.lower * s2, self.upper * s2)
        } else {
            (self.lower, self.upper)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WgcvSelection {
    pub lambda: f64,
    pub value: f64,
    /// All singular values vanished; `lambda` is the upper bound.
    pub degenerate: bool,
}

/// `G(lambda) = k ||(I - B B_lambda^+) beta_1 e_1||^2 / (k + 1 - omega tr(B B_lambda^+))^2`.
pub fn wgcv_function(svd: &ProjectedSvd, omega: f64, lambda: f64) -> f64 {
    let k = svd.k() as f64;
    let trace: f64 = svd.sigma.iter().map(|s| s * s / (s * s + lambda)).sum();
    let denom = k + 1.0 - omega * trace;
    k * svd.residual_sq(lambda) / (denom * denom)
}

/// Minimize the WGCV function over `lambda` (searched in log scale).
pub fn wgcv_select_lambda(svd: &ProjectedSvd, omega: f64, bounds: &WgcvBounds) -> Result<WgcvSelection> {
    bounds.validate()?;
    if svd.k() == 0 {
        return Err(Error::invalid("k", "projected problem is empty"));
    }
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::invalid("omega", format!("must lie in (0, 1], got {omega}")));
    }
    let smax = svd.sigma_max();
    let (lo, hi) = bounds.resolve(smax);
    if smax <= DEGENERATE_SIGMA {
        return Ok(WgcvSelection {
            lambda: hi,
            value: wgcv_function(svd, omega, hi),
            degenerate: true,
        });
    }
    let f = |t: f64| wgcv_function(svd, omega, 10f64.powf(t));
    let (t, value) = grid_then_brent(f, lo.log10(), hi.log10(), 61, 1e-8);
    Ok(WgcvSelection {
        lambda: 10f64.powf(t).clamp(lo, hi),
        value,
        degenerate: false,
    })
}

/// Weight estimate for WGCV from the current projected problem, evaluated at
/// `lambda = sigma_min^2`. Returns 1 when the estimate is undefined.
pub fn adaptive_omega(svd: &ProjectedSvd) -> f64 {
    let k = svd.k();
    if k == 0 {
        return 1.0;
    }
    let smin = svd.sigma.min();
    if !(smin > DEGENERATE_SIGMA * svd.sigma_max()) {
        return 1.0;
    }
    let lam = smin * smin;
    let m = (k + 1) as f64;
    let (mut t1, mut t3, mut t4, mut t5) = (0.0, 0.0, 0.0, 0.0);
    for (&s, &b) in svd.sigma.iter().zip(svd.bhat.iter()) {
        let tt = 1.0 / (s * s + lam);
        t1 += s * s * tt;
        t3 += lam * b * b * s * s * tt.powi(3);
        t4 += (s * tt).powi(2);
        t5 += (lam * b * tt).powi(2);
    }
    let omega = m * t3 / (t1 * t3 + t4 * (t5 + svd.outside));
    if omega.is_finite() && omega > 0.0 {
        omega
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_gcv_formula() {
        // B = [sigma; 0], data beta1 e1: bhat = beta1, nothing outside.
        let (sigma, beta1, lambda) = (2.0, 3.0, 0.5);
        let b = DMatrix::from_row_slice(2, 1, &[sigma, 0.0]);
        let svd = ProjectedSvd::from_bidiagonal(&b, beta1);
        let filt = lambda / (sigma * sigma + lambda);
        let expected = 1.0 * (filt * beta1).powi(2) / (2.0 - sigma * sigma / (sigma * sigma + lambda)).powi(2);
        assert!((wgcv_function(&svd, 1.0, lambda) - expected).abs() < 1e-14);
    }

    #[test]
    fn consistent_data_needs_no_regularization() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 0.8, 0.0, 0.0]);
        let svd = ProjectedSvd::from_bidiagonal(&b, 1.0);
        assert!(svd.outside < 1e-14);
        let sel = wgcv_select_lambda(&svd, 1.0, &WgcvBounds::default()).unwrap();
        assert!(sel.lambda <= 1e-6, "{}", sel.lambda);
    }

    #[test]
    fn gcv_is_finite_and_nonnegative() {
        let b = DMatrix::from_row_slice(4, 3, &[2.0, 0.0, 0.0, 0.7, 1.0, 0.0, 0.0, 0.3, 0.1, 0.0, 0.0, 0.05]);
        let svd = ProjectedSvd::from_bidiagonal(&b, 1.3);
        for i in 0..200 {
            let lam = 10f64.powf(-12.0 + i as f64 * 0.07);
            let g = wgcv_function(&svd, 0.7, lam);
            assert!(g.is_finite() && g >= 0.0);
        }
    }

    #[test]
    fn degenerate_matrix_returns_upper_bound() {
        let b = DMatrix::zeros(3, 2);
        let svd = ProjectedSvd::from_bidiagonal(&b, 1.0);
        let bounds = WgcvBounds {
            lower: 1e-4,
            upper: 10.0,
            relative: false,
        };
        let sel = wgcv_select_lambda(&svd, 1.0, &bounds).unwrap();
        assert!(sel.degenerate);
        assert_eq!(sel.lambda, 10.0);
    }

    #[test]
    fn omega_is_positive() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.4, 0.2, 0.0, 0.1]);
        let svd = ProjectedSvd::from_bidiagonal(&b, 1.0);
        let w = adaptive_omega(&svd);
        assert!(w.is_finite() && w > 0.0);
    }
}
