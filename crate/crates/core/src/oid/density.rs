use nalgebra::DVector;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{check_len, Error, Result};
use crate::noise::Sample;
use crate::operators::{LinearOperator, Operator};
use crate::optim::grid_then_brent;

/// Generalized-Gaussian fit `f(t) ∝ exp(-|t/sigma|^p / p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityFit {
    pub p: f64,
    pub sigma: f64,
    /// Mean log-likelihood per observation at the optimum.
    pub mean_log_likelihood: f64,
}

impl DensityFit {
    pub fn pdf(&self, t: f64) -> f64 {
        gg_log_pdf(t, self.p, self.sigma).exp()
    }
}

fn gg_log_pdf(t: f64, p: f64, sigma: f64) -> f64 {
    // The normalizing integral of exp(-|u|^p / p) is 2 p^(1/p - 1) Gamma(1/p).
    -(2.0f64).ln() - (1.0 / p - 1.0) * p.ln() - ln_gamma(1.0 / p) - sigma.ln() - (t / sigma).abs().powf(p) / p
}

/// Mean log-likelihood at exponent `p` with the scale profiled out:
/// `sigma^p = mean |t|^p`.
fn profile(data: &[f64], p: f64) -> (f64, f64) {
    let m = data.iter().map(|t| t.abs().powf(p)).sum::<f64>() / data.len() as f64;
    let sigma = m.powf(1.0 / p);
    let ll = -(2.0f64).ln() - (1.0 / p - 1.0) * p.ln() - ln_gamma(1.0 / p) - sigma.ln() - 1.0 / p;
    (ll, sigma)
}

/// Maximum-likelihood exponent over `p in [p_lo, p_hi]`.
pub fn fit_generalized_gaussian(data: &[f64], p_range: (f64, f64)) -> Result<DensityFit> {
    let (lo, hi) = p_range;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::invalid("p range", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if data.is_empty() || data.iter().all(|t| *t == 0.0) {
        return Err(Error::invalid("error sample", "needs at least one nonzero value"));
    }
    if data.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("error sample", "contains non-finite values"));
    }
    let (p, neg) = grid_then_brent(|p| -profile(data, p).0, lo, hi, 49, 1e-8);
    let (_, sigma) = profile(data, p);
    Ok(DensityFit {
        p,
        sigma,
        mean_log_likelihood: -neg,
    })
}

/// Pixel-wise decomposition of the data error seen by a solver that inverts
/// with `op_used` while the data came from `op_true`:
/// `b - op_used x = noise - model_error`.
#[derive(Debug, Clone, Serialize)]
pub struct DensityDiagnostic {
    pub noise: Vec<f64>,
    pub model_error: Vec<f64>,
    pub combined: Vec<f64>,
    pub fit: DensityFit,
}

pub fn noise_density_diagnostic(sample: &Sample, op_true: &Operator, op_used: &Operator) -> Result<DensityDiagnostic> {
    check_len(op_true.ncols(), sample.x_true.len())?;
    check_len(op_used.ncols(), sample.x_true.len())?;
    check_len(op_true.nrows(), sample.b.len())?;
    check_len(op_used.nrows(), sample.b.len())?;
    let clean = op_true.matvec(&sample.x_true);
    let noise: DVector<f64> = &sample.b - &clean;
    let model_error = op_used.matvec(&sample.x_true) - clean;
    let combined = &noise - &model_error;
    let fit = fit_generalized_gaussian(combined.as_slice(), (0.1, 2.5))?;
    Ok(DensityDiagnostic {
        noise: noise.as_slice().to_vec(),
        model_error: model_error.as_slice().to_vec(),
        combined: combined.as_slice().to_vec(),
        fit,
    })
}
