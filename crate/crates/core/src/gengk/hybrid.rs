//! Hybrid genGK: the regularization parameter is re-selected by WGCV on the
//! projected problem at every iteration.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::wgcv::{adaptive_omega, wgcv_select_lambda, ProjectedSvd, WgcvBounds};
use super::{gengk_expand, solve_projected_tikhonov, GenGkOptions, GenGkState};
use crate::error::{check_len, Error, Result};
use crate::operators::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenHybrOptions {
    pub k_max: usize,
    pub gengk: GenGkOptions,
    pub bounds: WgcvBounds,
    /// Fixed WGCV weight (1 is plain GCV); `None` estimates it adaptively
    /// from the running mean of per-iteration estimates.
    pub omega: Option<f64>,
    /// Relative change in lambda regarded as stable.
    pub stabilization_tol: f64,
    /// Consecutive stable iterations required to stop.
    pub stabilization_window: usize,
    /// Stop once the projected residual drops below this fraction of `||b||`.
    pub residual_tol: f64,
}

impl Default for GenHybrOptions {
    fn default() -> Self {
        Self {
            k_max: 50,
            gengk: GenGkOptions::default(),
            bounds: WgcvBounds::default(),
            omega: Some(1.0),
            stabilization_tol: 1e-2,
            stabilization_window: 3,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIterations,
    LambdaStable,
    Residual,
    Breakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HybridTraceRow {
    pub k: usize,
    pub lambda: f64,
    pub residual: f64,
    pub gcv: f64,
}

#[derive(Debug, Clone)]
pub struct GenHybrOutput {
    pub x: DVector<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub omega: f64,
    pub stop: StopReason,
    pub trace: Vec<HybridTraceRow>,
}

pub fn genhybr_solve(
    a: &dyn LinearOperator,
    q: &dyn LinearOperator,
    b: &DVector<f64>,
    opts: &GenHybrOptions,
) -> Result<GenHybrOutput> {
    check_len(a.nrows(), b.len())?;
    check_len(a.ncols(), q.ncols())?;
    if opts.k_max < 2 {
        return Err(Error::invalid("k_max", "hybrid solver needs at least 2 iterations"));
    }
    opts.bounds.validate()?;
    let mut state = GenGkState::new(b, opts.gengk)?;
    let mut omegas: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut prev_lambda: Option<f64> = None;
    let mut stable = 0;
    let mut best: Option<(DVector<f64>, f64, f64)> = None;
    let mut stop = StopReason::MaxIterations;

    for _ in 0..opts.k_max {
        gengk_expand(&mut state, a, q)?;
        if state.k() == 0 {
            stop = StopReason::Breakdown;
            break;
        }
        let svd = ProjectedSvd::new(&state);
        let omega = match opts.omega {
            Some(w) => w,
            None => {
                omegas.push(adaptive_omega(&svd));
                (omegas.iter().sum::<f64>() / omegas.len() as f64).min(1.0)
            }
        };
        let sel = wgcv_select_lambda(&svd, omega, &opts.bounds)?;
        let y = solve_projected_tikhonov(&svd, sel.lambda);
        let residual = svd.residual_sq(sel.lambda).sqrt();
        trace.push(HybridTraceRow {
            k: state.k(),
            lambda: sel.lambda,
            residual,
            gcv: sel.value,
        });
        best = Some((y, sel.lambda, omega));

        if state.breakdown {
            stop = StopReason::Breakdown;
            break;
        }
        if residual <= opts.residual_tol * state.beta1() {
            stop = StopReason::Residual;
            break;
        }
        if let Some(prev) = prev_lambda {
            if (sel.lambda - prev).abs() <= opts.stabilization_tol * prev {
                stable += 1;
            } else {
                stable = 0;
            }
            if stable >= opts.stabilization_window {
                stop = StopReason::LambdaStable;
                break;
            }
        }
        prev_lambda = Some(sel.lambda);
    }

    let Some((y, lambda, omega)) = best else {
        return Ok(GenHybrOutput {
            x: DVector::zeros(a.ncols()),
            lambda: opts.bounds.resolve(0.0).1,
            iterations: 0,
            omega: opts.omega.unwrap_or(1.0),
            stop,
            trace,
        });
    };
    Ok(GenHybrOutput {
        x: state.map_back(&y),
        lambda,
        iterations: state.k(),
        omega,
        stop,
        trace,
    })
}
