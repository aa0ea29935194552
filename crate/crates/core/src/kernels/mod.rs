//! Stationary covariance kernels on the pixel grid and the prior covariance
//! operators `Q(beta)` built from them.

mod bessel;
mod covariance;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub use bessel::{bessel_k, ln_bessel_k, BesselK};
pub use covariance::{cov_matvec, CovarianceOperator, Representation};

/// A kernel family with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// `exp(-r^2 / (2 beta^2))`.
    SquaredExponential { beta: f64 },
    /// Matérn kernel with smoothness `nu` and length scale `length`.
    Matern { nu: f64, length: f64 },
}

/// Kernel family without parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern,
}

impl KernelFamily {
    pub fn n_params(self) -> usize {
        match self {
            Self::SquaredExponential => 1,
            Self::Matern => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SquaredExponential => "sqexp",
            Self::Matern => "matern",
        }
    }

    /// Build a kernel from `beta` (sq-exp) or `[nu, length]` (Matérn).
    pub fn with_params(self, params: &[f64]) -> Result<KernelSpec> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                actual: params.len(),
            });
        }
        let spec = match self {
            Self::SquaredExponential => KernelSpec::SquaredExponential { beta: params[0] },
            Self::Matern => KernelSpec::Matern {
                nu: params[0],
                length: params[1],
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl KernelSpec {
    pub fn family(&self) -> KernelFamily {
        match self {
            Self::SquaredExponential { .. } => KernelFamily::SquaredExponential,
            Self::Matern { .. } => KernelFamily::Matern,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::SquaredExponential { beta } => vec![beta],
            Self::Matern { nu, length } => vec![nu, length],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Self::SquaredExponential { beta } if !ok(beta) => {
                Err(Error::invalid("beta", format!("must be positive, got {beta}")))
            }
            Self::Matern { nu, length } if !ok(nu) || !ok(length) => Err(Error::invalid(
                "matern",
                format!("smoothness and length scale must be positive, got {nu}, {length}"),
            )),
            _ => Ok(()),
        }
    }

    /// Kernel value at distance `r` without parameter validation.
    pub(crate) fn value(&self, r: f64) -> f64 {
        match *self {
            Self::SquaredExponential { beta } => (-r * r / (2.0 * beta * beta)).exp(),
            Self::Matern { nu, length } => matern(nu, length, r),
        }
    }
}

fn matern(nu: f64, length: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let t = r / length;
    if nu == 0.5 {
        return (-t).exp();
    }
    if nu == 1.5 {
        let s = 3f64.sqrt() * t;
        return (1.0 + s) * (-s).exp();
    }
    if nu == 2.5 {
        let s = 5f64.sqrt() * t;
        return (1.0 + s + s * s / 3.0) * (-s).exp();
    }
    let z = (2.0 * nu).sqrt() * t;
    let ln = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * z.ln() + ln_bessel_k(nu, z);
    ln.exp().min(1.0)
}

/// Evaluate the kernel at distance `r >= 0`.
pub fn kernel_eval(spec: &KernelSpec, r: f64) -> Result<f64> {
    spec.validate()?;
    if !(r >= 0.0) {
        return Err(Error::invalid("r", format!("distance must be nonnegative, got {r}")));
    }
    Ok(spec.value(r))
}
