//! Thin wrappers over `argmin` for the scalar and simplex searches used by
//! the parameter-selection code.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentOpt;
use argmin::solver::neldermead::NelderMead;

struct Scalar<F>(F);

impl<F: Fn(f64) -> f64> CostFunction for Scalar<F> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, x: &f64) -> Result<f64, argmin::core::Error> {
        Ok((self.0)(*x))
    }
}

struct Multi<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Multi<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok((self.0)(x))
    }
}

/// Brent's method on `[lo, hi]`. Returns `(argmin, min)`; the endpoints are
/// never returned, so callers wanting them must compare separately.
pub fn brent_minimize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64, max_iters: u64) -> (f64, f64) {
    let solver = BrentOpt::new(lo, hi).set_tolerance(1e-12, tol);
    let res = Executor::new(Scalar(&f), solver)
        .configure(|s| s.max_iters(max_iters))
        .run();
    match res {
        Ok(r) => {
            let x = r.state().get_best_param().copied().unwrap_or(0.5 * (lo + hi));
            (x, f(x))
        }
        Err(_) => {
            let x = 0.5 * (lo + hi);
            (x, f(x))
        }
    }
}

/// Grid search over `n` evenly spaced points followed by Brent refinement
/// in the bracket around the best grid point.
pub fn grid_then_brent<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    let n = n.max(3);
    let h = (hi - lo) / (n - 1) as f64;
    let values: Vec<f64> = (0..n).map(|i| f(lo + i as f64 * h)).collect();
    let (best, &fbest) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    let a = lo + best.saturating_sub(1) as f64 * h;
    let b = lo + (best + 1).min(n - 1) as f64 * h;
    let (x, fx) = brent_minimize(&f, a, b, tol, 200);
    if fx < fbest {
        (x, fx)
    } else {
        (lo + best as f64 * h, fbest)
    }
}

/// Nelder-Mead from the given initial simplex. Returns `(argmin, min)`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, simplex: Vec<Vec<f64>>, tol: f64, max_iters: u64) -> (Vec<f64>, f64) {
    let start = simplex[0].clone();
    let fallback = |f: &F| {
        let v = f(&start);
        (start.clone(), v)
    };
    let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(tol) else {
        return fallback(&f);
    };
    match Executor::new(Multi(&f), solver).configure(|s| s.max_iters(max_iters)).run() {
        Ok(r) => match r.state().get_best_param() {
            Some(x) => {
                let v = f(x);
                (x.clone(), v)
            }
            None => fallback(&f),
        },
        Err(_) => fallback(&f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_parabola_vertex() {
        let (x, fx) = brent_minimize(|x| (x - 0.7).powi(2) + 1.0, -2.0, 3.0, 1e-10, 100);
        assert!((x - 0.7).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_handles_multimodal_functions() {
        let f = |x: f64| (3.0 * x).sin() + 0.1 * x;
        let (x, _) = grid_then_brent(f, -4.0, 4.0, 50, 1e-10);
        let global = (0..80_000).map(|i| -4.0 + i as f64 * 1e-4).map(|t| (t, f(t))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert!((x - global.0).abs() < 1e-3);
    }

    #[test]
    fn nelder_mead_rosenbrock_like() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, fx) = nelder_mead(f, vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.0, 0.5]], 1e-12, 2000);
        assert!(fx < 1e-8, "{x:?}");
    }
}
