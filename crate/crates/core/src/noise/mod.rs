//! Observation simulation: additive noise models, random image transforms,
//! synthetic prototypes and training-set construction.

mod affine;
mod prototypes;
mod training;

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub use affine::{apply_affine, random_affine_transform, AffineParams, AffineRanges};
pub use prototypes::{blob_prototype, smooth_prototype, PrototypeKind};
pub use training::{
    center_data, generate_training_set, Centering, GenerationSpec, Sample, TrainingSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Impulse,
}

/// A noise kind with a relative level `0 <= eta < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub level: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, level: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&level) {
            return Err(Error::invalid("noise level", format!("must lie in [0, 1), got {level}")));
        }
        Ok(Self { kind, level })
    }

    pub fn corrupt(&self, y: &DVector<f64>, rng: &mut Rng) -> DVector<f64> {
        match self.kind {
            NoiseKind::Gaussian => add_gaussian_noise(y, self.level, rng),
            NoiseKind::Impulse => add_impulse_noise(y, self.level, rng),
        }
    }
}

/// Add white Gaussian noise rescaled so that `||e|| = eta ||y||` exactly.
pub fn add_gaussian_noise(y: &DVector<f64>, eta: f64, rng: &mut Rng) -> DVector<f64> {
    let target = eta * y.norm();
    if target == 0.0 {
        return y.clone();
    }
    let e = DVector::from_fn(y.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let scale = target / e.norm();
    y + e * scale
}

/// Replace each entry, with probability `eta`, by a uniform draw from
/// `[min(y), max(y)]`.
pub fn add_impulse_noise(y: &DVector<f64>, eta: f64, rng: &mut Rng) -> DVector<f64> {
    if eta <= 0.0 || y.is_empty() {
        return y.clone();
    }
    let (lo, hi) = (y.min(), y.max());
    y.map(|v| {
        if rng.random::<f64>() < eta {
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        } else {
            v
        }
    })
}
