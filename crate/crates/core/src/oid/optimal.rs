use serde::{Deserialize, Serialize};

use super::{design_objective, DesignParams, SolverConfig};
use crate::error::{Error, Result};
use crate::noise::TrainingSet;
use crate::optim::brent_minimize;

/// Best regularization parameter for a single image with known ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalLambda {
    pub lambda: f64,
    pub rre: f64,
}

const GRID: usize = 40;

/// Minimize the squared error of sample `j` over `lambda` in `bounds` with
/// the remaining parameters of `params` held fixed: a log grid followed by
/// Brent refinement around the best grid point. When `hint` is given (for
/// instance the learned `lambda`) it competes as an extra candidate, so the
/// result is never worse than the hint.
pub fn optimal_lambda_per_image(
    set: &TrainingSet,
    j: usize,
    params: &DesignParams,
    bounds: (f64, f64),
    hint: Option<f64>,
    cfg: &SolverConfig,
) -> Result<OptimalLambda> {
    if j >= set.len() {
        return Err(Error::invalid("sample index", format!("{j} out of range for {} samples", set.len())));
    }
    let (lo, hi) = bounds;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::invalid("lambda bounds", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if params.lambda.is_none() {
        return Err(Error::invalid("design parameters", "variant has no explicit lambda"));
    }
    let single = set.subset(&[j]);
    let norm_sq = single.samples[0].x_true.norm_squared();
    // Half the squared error of the single image.
    let err_at = |lam: f64| design_objective(&params.with_lambda(lam), &single, cfg);
    let err = |log_lam: f64| err_at(10f64.powf(log_lam));

    let (a, b) = (lo.log10(), hi.log10());
    let h = (b - a) / (GRID - 1) as f64;
    let grid: Vec<f64> = (0..GRID).map(|i| err(a + i as f64 * h)).collect();
    let (k, &gbest) = grid
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("grid is nonempty");
    let center = a + k as f64 * h;
    let (mut best_lam, mut best) = (10f64.powf(center), gbest);
    let (blo, bhi) = ((center - h).max(a), (center + h).min(b));
    let (x, fx) = brent_minimize(err, blo, bhi, 1e-6, 100);
    if fx < best {
        (best_lam, best) = (10f64.powf(x), fx);
    }
    if let Some(lam) = hint.filter(|l| *l > 0.0) {
        let fh = err_at(lam);
        if fh <= best {
            (best_lam, best) = (lam, fh);
        }
    }
    let rre = if norm_sq > 0.0 {
        (2.0 * best / norm_sq).sqrt()
    } else {
        (2.0 * best).sqrt()
    };
    Ok(OptimalLambda {
        lambda: best_lam,
        rre,
    })
}

/// Per-sample optimal `lambda` for standard-form Tikhonov (`p = q = 2`,
/// identity regularizer): the reference reconstruction a user could get with
/// a perfectly tuned white-noise prior.
pub fn identity_prior_optimal(set: &TrainingSet, bounds: (f64, f64), cfg: &SolverConfig) -> Result<Vec<OptimalLambda>> {
    let cfg = SolverConfig {
        regularizer: super::Regularizer::Identity,
        ..*cfg
    };
    let params = DesignParams::lplq(1.0, 2.0, 2.0);
    (0..set.len())
        .map(|j| optimal_lambda_per_image(set, j, &params, bounds, None, &cfg))
        .collect()
}
