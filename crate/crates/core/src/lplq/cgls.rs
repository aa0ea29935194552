use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::operators::LinearOperator;

#[derive(Debug, Clone)]
pub struct CglsOutput {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// `||[A; sqrt(lambda) L] x_k - [b; 0]||` for `k = 0, 1, ...`.
    pub residual_norms: Vec<f64>,
}

/// CGLS for `min ||A x - b||^2 + lambda ||L x||^2` from `x_0 = 0`.
pub fn cgls_solve(
    a: &dyn LinearOperator,
    b: &DVector<f64>,
    l: &dyn LinearOperator,
    lambda: f64,
    max_iters: usize,
) -> Result<DVector<f64>> {
    cgls_solve_with(a, b, l, lambda, max_iters, 0.0).map(|o| o.x)
}

/// CGLS stopping after `max_iters` steps or once the normal-equation
/// residual has dropped by the relative factor `tol`. The factor is never
/// below machine epsilon: past that point the recursively updated residuals
/// only shrink towards underflow and the iteration loses all accuracy.
///
/// Once the normal-equation residual reaches its rounding floor, conjugacy is
/// lost and the iterates can diverge exponentially. The iteration therefore
/// also stops when `||s|| <= 8 eps ||[A; sqrt(lambda) L]|| ||r||` (the norm
/// estimated from the Rayleigh quotients seen so far). As a backstop, a step
/// that increases the least-squares residual beyond rounding is undone.
pub fn cgls_solve_with(
    a: &dyn LinearOperator,
    b: &DVector<f64>,
    l: &dyn LinearOperator,
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<CglsOutput> {
    check_len(a.nrows(), b.len())?;
    check_len(a.ncols(), l.ncols())?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    let tol = tol.max(f64::EPSILON);
    let sl = lambda.sqrt();
    let mut x = DVector::zeros(a.ncols());
    let mut r = b.clone();
    let mut t = DVector::zeros(l.nrows());
    let mut s = a.matvec_t(&r);
    let mut p = s.clone();
    let mut gamma = s.norm_squared();
    let gamma0 = gamma;
    let mut residual_norms = vec![r.norm()];
    let mut iterations = 0;

    let mut norm_sq_est: f64 = 0.0;
    for _ in 0..max_iters {
        if gamma == 0.0 || gamma <= tol * tol * gamma0 {
            break;
        }
        let floor = 8.0 * f64::EPSILON * residual_norms.last().expect("initial residual");
        if gamma <= floor * floor * norm_sq_est {
            break;
        }
        let q1 = a.matvec(&p);
        let q2 = l.matvec(&p) * sl;
        let denom = q1.norm_squared() + q2.norm_squared();
        if denom <= 0.0 {
            break;
        }
        norm_sq_est = norm_sq_est.max(denom / p.norm_squared());
        let alpha = gamma / denom;
        let r_new = &r - &q1 * alpha;
        let t_new = &t - &q2 * alpha;
        let res = (r_new.norm_squared() + t_new.norm_squared()).sqrt();
        if res > residual_norms.last().expect("initial residual") * (1.0 + 1e-10) {
            break;
        }
        x.axpy(alpha, &p, 1.0);
        r = r_new;
        t = t_new;
        s = a.matvec_t(&r) + l.matvec_t(&t) * sl;
        let gamma_new = s.norm_squared();
        p = &s + &p * (gamma_new / gamma);
        gamma = gamma_new;
        iterations += 1;
        residual_norms.push(res);
    }
    Ok(CglsOutput {
        x,
        iterations,
        residual_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Identity, Operator};
    use nalgebra::DMatrix;
    use rand::{Rng as _, SeedableRng};

    #[test]
    fn converges_to_regularized_solution() {
        let mut rng = crate::rng::Rng::seed_from_u64(1);
        let ad = DMatrix::from_fn(30, 12, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let a = Operator::dense(ad.clone());
        let out = cgls_solve_with(&a, &b, &Identity { n: 12 }, 0.3, 100, 1e-14).unwrap();
        let lhs = ad.transpose() * &ad + DMatrix::identity(12, 12) * 0.3;
        let exact = lhs.lu().solve(&(ad.transpose() * &b)).unwrap();
        assert!((&out.x - &exact).norm() <= 1e-9 * exact.norm());
        for w in out.residual_norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn long_runs_on_well_conditioned_problems_stay_accurate() {
        let a = Operator::identity(5);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5, 4.0]);
        let x = cgls_solve(&a, &b, &Identity { n: 5 }, 1.0, 500).unwrap();
        assert!((x - &b * 0.5).norm() <= 1e-14);
    }

    #[test]
    fn zero_iterations_returns_zero() {
        let a = Operator::identity(3);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(cgls_solve(&a, &b, &Identity { n: 3 }, 1.0, 0).unwrap(), DVector::zeros(3));
    }
}
