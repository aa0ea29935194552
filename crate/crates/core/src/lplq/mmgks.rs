use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LpLqProblem, SmoothingConfig};
use crate::error::{check_len, Error, Result};
use crate::linalg::{cgs2, columns_to_matrix, lstsq};
use crate::operators::LinearOperator;

/// Relative size below which an orthogonalized direction is treated as
/// lying in the current subspace.
const BREAKDOWN_TOL: f64 = 1e-14;

/// Direction used to enlarge the subspace after each MM step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expansion {
    /// `A^T (A x_k - b) + lambda L^T L x_k`, the gradient of the unweighted
    /// quadratic.
    Unweighted,
    /// The same residual with the MM weights at `x_k` applied, i.e. the
    /// gradient of the current majorant. For severely ill-posed operators the
    /// unweighted direction nearly lies in the subspace after a few steps,
    /// which makes the iterates extremely sensitive to the inputs; this
    /// variant keeps adding informative directions.
    #[default]
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmGksOptions {
    pub max_iters: usize,
    /// Golub-Kahan steps used to build the initial subspace.
    pub initial_dim: usize,
    /// Stop once `||x_{k+1} - x_k|| <= tol ||x_k||`. Zero disables the test.
    pub tol: f64,
    pub smoothing: SmoothingConfig,
    pub expansion: Expansion,
    pub record_trace: bool,
}

impl Default for MmGksOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            initial_dim: 5,
            tol: 1e-6,
            smoothing: SmoothingConfig::default(),
            expansion: Expansion::Weighted,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    /// Smoothed objective at the iterate.
    pub objective: f64,
    pub subspace_dim: usize,
}

#[derive(Debug, Clone)]
pub struct MmGksOutput {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub subspace_dim: usize,
    /// The subspace stopped growing because a new direction vanished.
    pub breakdown: bool,
    pub converged: bool,
    /// Row `k` holds the objective at `x_k`, starting from `x_0 = 0`.
    pub trace: Vec<TraceRow>,
}

/// Orthonormal basis of the Krylov space `K_h(A^T A, A^T b)` from `h` steps of
/// Golub-Kahan bidiagonalization with full reorthogonalization. Returns fewer
/// than `h` vectors on breakdown.
pub fn golub_kahan_basis(a: &dyn LinearOperator, b: &DVector<f64>, h: usize) -> Vec<DVector<f64>> {
    let mut us: Vec<DVector<f64>> = Vec::new();
    let mut vs: Vec<DVector<f64>> = Vec::new();
    let beta = b.norm();
    if beta == 0.0 || h == 0 {
        return vs;
    }
    us.push(b / beta);
    for _ in 0..h.min(a.ncols()) {
        let mut v = a.matvec_t(us.last().unwrap());
        let before = cgs2(&vs, &mut v);
        let alpha = v.norm();
        if before == 0.0 || alpha <= BREAKDOWN_TOL * before.max(f64::MIN_POSITIVE) {
            break;
        }
        vs.push(v / alpha);
        let mut u = a.matvec(vs.last().unwrap());
        let before = cgs2(&us, &mut u);
        let beta = u.norm();
        if before == 0.0 || beta <= BREAKDOWN_TOL * before {
            break;
        }
        us.push(u / beta);
    }
    vs
}

/// Solution of the projected weighted problem on the current subspace.
#[derive(Debug, Clone)]
pub struct ProjectedSolution {
    pub y: DVector<f64>,
    pub r_fit: DMatrix<f64>,
    pub r_reg: DMatrix<f64>,
    /// `Q_fit^T S_p^{1/2} b`.
    pub rhs: DVector<f64>,
}

/// Minimize `||S_p^{1/2}(AV y - b)||^2 + lambda ||S_q^{1/2} LV y||^2` over `y`
/// through skinny QR factors of the weighted blocks.
pub fn solve_projected(
    av: &DMatrix<f64>,
    lv: &DMatrix<f64>,
    fit_weights: &DVector<f64>,
    reg_weights: &DVector<f64>,
    b: &DVector<f64>,
    lambda: f64,
) -> ProjectedSolution {
    let k = av.ncols();
    let sp = fit_weights.map(f64::sqrt);
    let sq = reg_weights.map(f64::sqrt);
    let mut wa = av.clone();
    for (mut row, s) in wa.row_iter_mut().zip(sp.iter()) {
        row *= *s;
    }
    let mut wl = lv.clone();
    for (mut row, s) in wl.row_iter_mut().zip(sq.iter()) {
        row *= *s;
    }
    let qr_fit = wa.qr();
    let r_fit = qr_fit.r();
    let rhs = qr_fit.q().transpose() * sp.component_mul(b);
    let r_reg = wl.qr().r();

    let rows_fit = r_fit.nrows();
    let rows_reg = r_reg.nrows();
    let mut stacked = DMatrix::zeros(rows_fit + rows_reg, k);
    stacked.view_mut((0, 0), (rows_fit, k)).copy_from(&r_fit);
    stacked
        .view_mut((rows_fit, 0), (rows_reg, k))
        .copy_from(&(&r_reg * lambda.sqrt()));
    let mut full_rhs = DVector::zeros(rows_fit + rows_reg);
    full_rhs.rows_mut(0, rows_fit).copy_from(&rhs);
    let y = lstsq(&stacked, &full_rhs, 1e-14);
    ProjectedSolution { y, r_fit, r_reg, rhs }
}

/// MM-GKS with default options apart from the iteration count.
pub fn mm_gks_solve(
    a: &dyn LinearOperator,
    b: &DVector<f64>,
    l: &dyn LinearOperator,
    lambda: f64,
    p: f64,
    q: f64,
    max_iters: usize,
) -> Result<MmGksOutput> {
    let opts = MmGksOptions {
        max_iters,
        ..MmGksOptions::default()
    };
    mm_gks_solve_with(a, b, l, lambda, p, q, &opts)
}

/// Majorization-minimization on a generalized Krylov subspace.
///
/// `x_0 = 0`; each iteration freezes the weights at the current iterate,
/// minimizes the resulting quadratic over the subspace, and then enlarges the
/// subspace with the normalized residual chosen by `opts.expansion` at the
/// new iterate. After a breakdown the subspace stays fixed
/// and the MM iteration continues on it.
pub fn mm_gks_solve_with(
    a: &dyn LinearOperator,
    b: &DVector<f64>,
    l: &dyn LinearOperator,
    lambda: f64,
    p: f64,
    q: f64,
    opts: &MmGksOptions,
) -> Result<MmGksOutput> {
    let problem = LpLqProblem::new(a, b, l, lambda, p, q, &opts.smoothing)?;
    if opts.max_iters == 0 {
        return Err(Error::invalid("max_iters", "must be at least 1"));
    }
    if opts.initial_dim == 0 {
        return Err(Error::invalid("initial_dim", "must be at least 1"));
    }
    let n = a.ncols();
    let m = a.nrows();
    let r = l.nrows();

    let mut vs = golub_kahan_basis(a, b, opts.initial_dim);
    let mut x = DVector::zeros(n);
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(TraceRow {
            iter: 0,
            objective: problem.smoothed_objective(&x),
            subspace_dim: vs.len(),
        });
    }
    if vs.is_empty() {
        return Ok(MmGksOutput {
            x,
            iterations: 0,
            subspace_dim: 0,
            breakdown: true,
            converged: true,
            trace,
        });
    }
    let mut avs: Vec<DVector<f64>> = vs.iter().map(|v| a.matvec(v)).collect();
    let mut lvs: Vec<DVector<f64>> = vs.iter().map(|v| l.matvec(v)).collect();
    let mut ax = DVector::zeros(m);
    let mut lx = DVector::zeros(r);
    let mut breakdown = false;
    let mut converged = false;
    let mut iterations = 0;

    for k in 0..opts.max_iters {
        let fit_res = &ax - b;
        let wp = super::weights_with_eps(&fit_res, p, problem.eps_fit);
        let wq = super::weights_with_eps(&lx, q, problem.eps_reg);
        if k > 0 && !breakdown {
            let mut v = match opts.expansion {
                Expansion::Unweighted => a.matvec_t(&fit_res) + l.matvec_t(&lx) * lambda,
                Expansion::Weighted => a.matvec_t(&wp.component_mul(&fit_res)) + l.matvec_t(&wq.component_mul(&lx)) * lambda,
            };
            let before = cgs2(&vs, &mut v);
            let norm = v.norm();
            if before == 0.0 || norm <= BREAKDOWN_TOL * before || vs.len() >= n {
                breakdown = true;
            } else {
                v /= norm;
                avs.push(a.matvec(&v));
                lvs.push(l.matvec(&v));
                vs.push(v);
            }
        }

        let av = columns_to_matrix(m, &avs);
        let lv = columns_to_matrix(r, &lvs);
        let sol = solve_projected(&av, &lv, &wp, &wq, b, lambda);

        let x_new = combine(&vs, &sol.y, n);
        ax = &av * &sol.y;
        lx = &lv * &sol.y;
        let step = (&x_new - &x).norm();
        let scale = x.norm();
        x = x_new;
        iterations = k + 1;
        if opts.record_trace {
            trace.push(TraceRow {
                iter: iterations,
                objective: problem.smoothed_objective(&x),
                subspace_dim: vs.len(),
            });
        }
        if opts.tol > 0.0 && k > 0 && step <= opts.tol * scale {
            converged = true;
            break;
        }
    }
    check_len(n, x.len())?;
    Ok(MmGksOutput {
        x,
        iterations,
        subspace_dim: vs.len(),
        breakdown,
        converged,
        trace,
    })
}

fn combine(vs: &[DVector<f64>], y: &DVector<f64>, n: usize) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for (v, c) in vs.iter().zip(y.iter()) {
        x.axpy(*c, v, 1.0);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Identity, Operator};
    use rand::{Rng as _, SeedableRng};

    fn random_dense(seed: u64, m: usize, n: usize) -> (Operator, DVector<f64>) {
        let mut rng = crate::rng::Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        (Operator::dense(a), b)
    }

    #[test]
    fn gk_basis_is_orthonormal() {
        let (a, b) = random_dense(5, 12, 9);
        let vs = golub_kahan_basis(&a, &b, 5);
        assert_eq!(vs.len(), 5);
        let v = columns_to_matrix(9, &vs);
        let gram = v.transpose() * &v;
        assert!(crate::linalg::max_abs_from_identity(&gram) < 1e-12);
    }

    #[test]
    fn gk_basis_stops_at_full_dimension() {
        let (a, b) = random_dense(6, 8, 3);
        assert_eq!(golub_kahan_basis(&a, &b, 10).len(), 3);
    }

    #[test]
    fn quadratic_case_matches_tikhonov() {
        let (a, b) = random_dense(7, 20, 10);
        let l = Identity { n: 10 };
        let out = mm_gks_solve(&a, &b, &l, 0.1, 2.0, 2.0, 20).unwrap();
        let ad = a.to_dense();
        let lhs = ad.transpose() * &ad + DMatrix::identity(10, 10) * 0.1;
        let exact = lhs.lu().solve(&(ad.transpose() * &b)).unwrap();
        assert!((&out.x - &exact).norm() <= 1e-8 * exact.norm());
    }

    #[test]
    fn projected_solution_satisfies_normal_equations() {
        let (a, b) = random_dense(8, 15, 6);
        let l = Identity { n: 6 };
        let vs = golub_kahan_basis(&a, &b, 4);
        let av = columns_to_matrix(15, &vs.iter().map(|v| a.matvec(v)).collect::<Vec<_>>());
        let lv = columns_to_matrix(6, &vs.iter().map(|v| l.matvec(v)).collect::<Vec<_>>());
        let wp = DVector::from_fn(15, |i, _| 0.5 + i as f64 * 0.1);
        let wq = DVector::from_fn(6, |i, _| 2.0 - i as f64 * 0.2);
        let sol = solve_projected(&av, &lv, &wp, &wq, &b, 0.4);
        let lhs = sol.r_fit.transpose() * &sol.r_fit + sol.r_reg.transpose() * &sol.r_reg * 0.4;
        let res = &lhs * &sol.y - sol.r_fit.transpose() * &sol.rhs;
        assert!(res.norm() <= 1e-10 * (lhs.norm() * sol.y.norm()).max(1.0));
    }

    #[test]
    fn trace_is_monotone() {
        let (a, b) = random_dense(9, 25, 12);
        let l = Identity { n: 12 };
        let opts = MmGksOptions {
            max_iters: 30,
            record_trace: true,
            tol: 0.0,
            ..MmGksOptions::default()
        };
        let out = mm_gks_solve_with(&a, &b, &l, 0.05, 1.0, 0.8, &opts).unwrap();
        assert_eq!(out.trace.len(), 31);
        for w in out.trace.windows(2) {
            assert!(w[1].objective <= w[0].objective * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let (a, _) = random_dense(10, 6, 4);
        let b = DVector::zeros(6);
        let out = mm_gks_solve(&a, &b, &Identity { n: 4 }, 1.0, 1.0, 1.0, 5).unwrap();
        assert_eq!(out.x, DVector::zeros(4));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (a, b) = random_dense(11, 6, 4);
        assert!(mm_gks_solve(&a, &b, &Identity { n: 5 }, 1.0, 1.0, 1.0, 5).is_err());
    }
}
