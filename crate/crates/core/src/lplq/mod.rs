//! Lp-Lq regularized least squares:
//!
//! ```text
//! min_x  ||A x - b||_p^p + lambda ||L x||_q^q
//! ```
//!
//! solved by majorization-minimization on generalized Krylov subspaces
//! ([`mm_gks_solve`]), with CGLS ([`cgls_solve`]) for the quadratic case.
//!
//! Both norms are smoothed with `phi_eps(t) = sqrt(t^2 + eps^2)`. The function
//! driven downhill by the MM iteration is
//!
//! ```text
//! F(x) = (2/p) sum phi_eps(A x - b)^p + lambda (2/q) sum phi_eps(L x)^q
//! ```
//!
//! whose quadratic tangent majorant at `x_k` is, up to an additive constant,
//! `||S_p^{1/2} (A x - b)||^2 + lambda ||S_q^{1/2} L x||^2` with the diagonal
//! weights `S_s = diag(phi_eps(v)^(s-2))` frozen at `x_k`. The majorization
//! holds for `0 < p, q <= 2`.

mod cgls;
mod mmgks;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operators::LinearOperator;

pub use cgls::{cgls_solve, cgls_solve_with, CglsOutput};
pub use mmgks::{
    golub_kahan_basis, mm_gks_solve, mm_gks_solve_with, solve_projected, Expansion, MmGksOptions,
    MmGksOutput, ProjectedSolution, TraceRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonPolicy {
    /// `epsilon` is used as given.
    Absolute,
    /// `epsilon` is multiplied by the largest magnitude of the reference data.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    pub epsilon: f64,
    pub policy: EpsilonPolicy,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            policy: EpsilonPolicy::Relative,
        }
    }
}

impl SmoothingConfig {
    /// Relative lower bound on the smoothing parameter. Keeps the weights
    /// finite at zero for every exponent below 2.
    pub const FLOOR: f64 = 1e-8;

    pub fn absolute(epsilon: f64) -> Self {
        Self {
            epsilon,
            policy: EpsilonPolicy::Absolute,
        }
    }

    /// Effective smoothing parameter for data with the given reference values.
    pub fn resolve(&self, reference: &[f64]) -> f64 {
        let peak = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if peak > 0.0 { peak } else { 1.0 };
        let base = match self.policy {
            EpsilonPolicy::Absolute => self.epsilon,
            EpsilonPolicy::Relative => self.epsilon * scale,
        };
        base.max(Self::FLOOR * scale)
    }
}

/// Smoothed absolute value.
#[inline]
pub fn phi(t: f64, eps: f64) -> f64 {
    (t * t + eps * eps).sqrt()
}

/// Diagonal of `S_{s,eps}(v) = diag(phi_eps(v_j)^(s-2))`.
pub fn smoothing_weights(v: &DVector<f64>, s: f64, cfg: &SmoothingConfig) -> Result<DVector<f64>> {
    if !(s > 0.0) {
        return Err(Error::invalid("exponent", format!("must be positive, got {s}")));
    }
    Ok(weights_with_eps(v, s, cfg.resolve(v.as_slice())))
}

pub(crate) fn weights_with_eps(v: &DVector<f64>, s: f64, eps: f64) -> DVector<f64> {
    if s == 2.0 {
        return DVector::from_element(v.len(), 1.0);
    }
    v.map(|t| phi(t, eps).powf(s - 2.0))
}

/// A fully specified Lp-Lq problem with resolved smoothing parameters.
pub struct LpLqProblem<'a> {
    pub a: &'a dyn LinearOperator,
    pub b: &'a DVector<f64>,
    pub l: &'a dyn LinearOperator,
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    pub eps_fit: f64,
    pub eps_reg: f64,
}

impl<'a> LpLqProblem<'a> {
    /// Validate dimensions and parameters. Both smoothing parameters are
    /// resolved against `b`, so they stay fixed for the whole solve.
    pub fn new(
        a: &'a dyn LinearOperator,
        b: &'a DVector<f64>,
        l: &'a dyn LinearOperator,
        lambda: f64,
        p: f64,
        q: f64,
        smoothing: &SmoothingConfig,
    ) -> Result<Self> {
        check_len(a.nrows(), b.len())?;
        check_len(a.ncols(), l.ncols())?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("must be nonnegative, got {lambda}")));
        }
        if !(p > 0.0 && q > 0.0) {
            return Err(Error::invalid("exponent", format!("p and q must be positive, got p={p}, q={q}")));
        }
        let eps = smoothing.resolve(b.as_slice());
        Ok(Self {
            a,
            b,
            l,
            lambda,
            p,
            q,
            eps_fit: eps,
            eps_reg: eps,
        })
    }

    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.matvec(x) - self.b
    }

    fn smoothed_sum(v: &DVector<f64>, s: f64, eps: f64) -> f64 {
        (2.0 / s) * v.iter().map(|&t| phi(t, eps).powf(s)).sum::<f64>()
    }

    /// The smoothed functional `F` that MM decreases.
    pub fn smoothed_objective(&self, x: &DVector<f64>) -> f64 {
        let r = self.residual(x);
        let lx = self.l.matvec(x);
        Self::smoothed_sum(&r, self.p, self.eps_fit)
            + self.lambda * Self::smoothed_sum(&lx, self.q, self.eps_reg)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.residual(x);
        let lx = self.l.matvec(x);
        let wr = weights_with_eps(&r, self.p, self.eps_fit).component_mul(&r);
        let wl = weights_with_eps(&lx, self.q, self.eps_reg).component_mul(&lx);
        (self.a.matvec_t(&wr) + self.l.matvec_t(&wl) * self.lambda) * 2.0
    }

    pub fn fit_weights(&self, x: &DVector<f64>) -> DVector<f64> {
        weights_with_eps(&self.residual(x), self.p, self.eps_fit)
    }

    pub fn reg_weights(&self, x: &DVector<f64>) -> DVector<f64> {
        weights_with_eps(&self.l.matvec(x), self.q, self.eps_reg)
    }

    /// Quadratic tangent majorant at `x_k`, without its additive constant.
    pub fn majorant(&self, x: &DVector<f64>, x_k: &DVector<f64>) -> f64 {
        let wp = self.fit_weights(x_k);
        let wq = self.reg_weights(x_k);
        let r = self.residual(x);
        let lx = self.l.matvec(x);
        let fit: f64 = r.iter().zip(wp.iter()).map(|(t, w)| w * t * t).sum();
        let reg: f64 = lx.iter().zip(wq.iter()).map(|(t, w)| w * t * t).sum();
        fit + self.lambda * reg
    }

    /// Additive constant `F(x_k) - M(x_k, x_k)` aligning majorant and objective.
    pub fn tangency_constant(&self, x_k: &DVector<f64>) -> f64 {
        self.smoothed_objective(x_k) - self.majorant(x_k, x_k)
    }
}

/// Evaluate the quadratic tangent majorant `M(x, x_k)`.
#[allow(clippy::too_many_arguments)]
pub fn majorant_value(
    x: &DVector<f64>,
    x_k: &DVector<f64>,
    a: &dyn LinearOperator,
    b: &DVector<f64>,
    l: &dyn LinearOperator,
    lambda: f64,
    p: f64,
    q: f64,
    smoothing: &SmoothingConfig,
) -> Result<f64> {
    let problem = LpLqProblem::new(a, b, l, lambda, p, q, smoothing)?;
    check_len(a.ncols(), x.len())?;
    check_len(a.ncols(), x_k.len())?;
    Ok(problem.majorant(x, x_k))
}
