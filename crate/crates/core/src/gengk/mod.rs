//! Generalized Golub-Kahan (genGK) bidiagonalization for the prior-whitened
//! Tikhonov problem
//!
//! ```text
//! min_x ||A x - b||^2 + lambda ||x||^2_{Q^{-1}}
//! ```
//!
//! using only products with `A`, `A^T` and `Q`. After `k` steps
//! `A Q V_k = U_{k+1} B_k` with `U` orthonormal, `V` orthonormal in the
//! `Q` inner product and `B_k` lower bidiagonal; the iterate is
//! `x_k = Q V_k y_k` with `y_k` solving a small Tikhonov problem in `B_k`.

mod hybrid;
mod wgcv;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::cgs2;
use crate::operators::LinearOperator;

pub use hybrid::{genhybr_solve, GenHybrOptions, GenHybrOutput, HybridTraceRow};
pub use wgcv::{
    adaptive_omega, wgcv_function, wgcv_select_lambda, ProjectedSvd, WgcvBounds, WgcvSelection,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenGkOptions {
    /// Reorthogonalize each new `u` against `U` and each new `v` against `V`
    /// (in the `Q` inner product).
    pub reorthogonalize: bool,
    /// A new basis vector whose norm after orthogonalization falls below this
    /// fraction of its norm before is treated as a breakdown.
    pub breakdown_tol: f64,
}

impl Default for GenGkOptions {
    fn default() -> Self {
        Self {
            reorthogonalize: true,
            breakdown_tol: 1e-12,
        }
    }
}

/// Partial genGK factorization after `k` steps.
#[derive(Debug, Clone)]
pub struct GenGkState {
    /// `u_1 .. u_{k+1}`.
    pub u: Vec<DVector<f64>>,
    /// `v_1 .. v_k`.
    pub v: Vec<DVector<f64>>,
    /// `Q v_1 .. Q v_k`.
    pub qv: Vec<DVector<f64>>,
    /// Diagonal of `B_k`.
    pub alphas: Vec<f64>,
    /// `beta_1 = ||b||`, then the subdiagonal of `B_k`.
    pub betas: Vec<f64>,
    pub breakdown: bool,
    opts: GenGkOptions,
}

impl GenGkState {
    pub fn new(b: &DVector<f64>, opts: GenGkOptions) -> Result<Self> {
        let beta1 = b.norm();
        if !(beta1 > 0.0) || !beta1.is_finite() {
            return Err(Error::invalid("b", "right-hand side must be nonzero and finite"));
        }
        Ok(Self {
            u: vec![b / beta1],
            v: Vec::new(),
            qv: Vec::new(),
            alphas: Vec::new(),
            betas: vec![beta1],
            breakdown: false,
            opts,
        })
    }

    pub fn k(&self) -> usize {
        self.v.len()
    }

    pub fn beta1(&self) -> f64 {
        self.betas[0]
    }

    /// `B_k` as a dense `(k+1) x k` matrix.
    pub fn bidiagonal(&self) -> DMatrix<f64> {
        let k = self.k();
        let mut b = DMatrix::zeros(k + 1, k);
        for j in 0..k {
            b[(j, j)] = self.alphas[j];
            b[(j + 1, j)] = self.betas[j + 1];
        }
        b
    }

    /// `Q V_k y`.
    pub fn map_back(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.qv[0].len());
        for (qv, c) in self.qv.iter().zip(y.iter()) {
            x.axpy(*c, qv, 1.0);
        }
        x
    }
}

/// One genGK step. Does nothing once a breakdown has been flagged.
pub fn gengk_expand(state: &mut GenGkState, a: &dyn LinearOperator, q: &dyn LinearOperator) -> Result<()> {
    if state.breakdown {
        return Ok(());
    }
    let uk = state.u.last().expect("state holds u_1");
    check_len(a.nrows(), uk.len())?;
    check_len(a.ncols(), q.ncols())?;
    let tol = state.opts.breakdown_tol;

    let mut w = a.matvec_t(uk);
    if let Some(v_prev) = state.v.last() {
        let beta = *state.betas.last().unwrap();
        w.axpy(-beta, v_prev, 1.0);
    }
    let mut qw = q.matvec(&w);
    let before = w.dot(&qw).max(0.0).sqrt();
    if state.opts.reorthogonalize {
        // Q-inner products <v_i, w>_Q = (Q v_i)^T w; Q w is updated by linearity.
        for _ in 0..2 {
            let coeffs: Vec<f64> = state.qv.iter().map(|qv| qv.dot(&w)).collect();
            for ((v, qv), c) in state.v.iter().zip(&state.qv).zip(coeffs) {
                w.axpy(-c, v, 1.0);
                qw.axpy(-c, qv, 1.0);
            }
        }
    }
    let alpha_sq = w.dot(&qw);
    let roundoff = 64.0 * f64::EPSILON * w.norm() * qw.norm();
    if !(alpha_sq > roundoff) || alpha_sq.sqrt() <= tol * before {
        state.breakdown = true;
        return Ok(());
    }
    let alpha = alpha_sq.sqrt();
    w /= alpha;
    qw /= alpha;

    let mut z = a.matvec(&qw);
    z.axpy(-alpha, uk, 1.0);
    let before = z.norm();
    if state.opts.reorthogonalize {
        cgs2(&state.u, &mut z);
    }
    let beta = z.norm();
    state.v.push(w);
    state.qv.push(qw);
    state.alphas.push(alpha);
    if !(beta > tol * before) || beta == 0.0 {
        // The range is exhausted: keep B_k square-bottomed with a zero entry.
        state.betas.push(0.0);
        state.u.push(DVector::zeros(z.len()));
        state.breakdown = true;
        return Ok(());
    }
    state.betas.push(beta);
    state.u.push(z / beta);
    Ok(())
}

/// Solution of the projected Tikhonov problem
/// `min ||B_k y - beta_1 e_1||^2 + lambda ||y||^2` through the SVD of `B_k`.
pub fn solve_projected_tikhonov(svd: &ProjectedSvd, lambda: f64) -> DVector<f64> {
    let coeffs = DVector::from_iterator(
        svd.sigma.len(),
        svd.sigma
            .iter()
            .zip(svd.bhat.iter())
            .map(|(s, bh)| s * bh / (s * s + lambda)),
    );
    &svd.z * coeffs
}

#[derive(Debug, Clone)]
pub struct GenGkSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub breakdown: bool,
}

/// Run up to `k_max` genGK steps and return `x_k` for the fixed `lambda`.
pub fn gengk_solve(
    a: &dyn LinearOperator,
    q: &dyn LinearOperator,
    b: &DVector<f64>,
    lambda: f64,
    k_max: usize,
    opts: &GenGkOptions,
) -> Result<GenGkSolution> {
    check_len(a.nrows(), b.len())?;
    check_len(a.ncols(), q.ncols())?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if k_max == 0 {
        return Err(Error::invalid("k_max", "must be at least 1"));
    }
    if b.norm() == 0.0 {
        return Ok(GenGkSolution {
            x: DVector::zeros(a.ncols()),
            iterations: 0,
            breakdown: true,
        });
    }
    let mut state = GenGkState::new(b, *opts)?;
    for _ in 0..k_max {
        gengk_expand(&mut state, a, q)?;
        if state.breakdown {
            break;
        }
    }
    if state.k() == 0 {
        return Ok(GenGkSolution {
            x: DVector::zeros(a.ncols()),
            iterations: 0,
            breakdown: true,
        });
    }
    let svd = ProjectedSvd::new(&state);
    let y = solve_projected_tikhonov(&svd, lambda);
    Ok(GenGkSolution {
        x: state.map_back(&y),
        iterations: state.k(),
        breakdown: state.breakdown,
    })
}
