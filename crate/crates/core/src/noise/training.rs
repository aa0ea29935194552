use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::affine::{random_affine_transform, AffineParams, AffineRanges};
use super::{NoiseKind, NoiseModel};
use crate::error::{check_len, Error, Result};
use crate::linalg::mean_of;
use crate::operators::{GridGeometry, LinearOperator, Operator};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x_true: DVector<f64>,
    pub b: DVector<f64>,
    /// Noise level drawn for this sample.
    pub eta: f64,
    pub affine: Option<AffineParams>,
}

/// Sample mean of the ground truths and its image under the inversion
/// operator. Solvers see `b - b_mean` and add `x_mean` back.
#[derive(Debug, Clone, PartialEq)]
pub struct Centering {
    pub x_mean: DVector<f64>,
    pub b_mean: DVector<f64>,
}

/// Paired ground truths and observations, the operator that produced the
/// observations and the (possibly different) operator used for inversion.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub geom: GridGeometry,
    pub samples: Vec<Sample>,
    pub op_generate: Arc<Operator>,
    pub op_invert: Arc<Operator>,
    pub centering: Option<Centering>,
}

impl TrainingSet {
    pub fn new(
        geom: GridGeometry,
        samples: Vec<Sample>,
        op_generate: Arc<Operator>,
        op_invert: Arc<Operator>,
    ) -> Result<Self> {
        check_len(geom.len(), op_generate.ncols())?;
        check_len(op_generate.ncols(), op_invert.ncols())?;
        check_len(op_generate.nrows(), op_invert.nrows())?;
        for s in &samples {
            check_len(geom.len(), s.x_true.len())?;
            check_len(op_generate.nrows(), s.b.len())?;
        }
        Ok(Self {
            geom,
            samples,
            op_generate,
            op_invert,
            centering: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Right-hand side handed to the inner solver for sample `j`.
    pub fn rhs(&self, j: usize) -> DVector<f64> {
        match &self.centering {
            Some(c) => &self.samples[j].b - &c.b_mean,
            None => self.samples[j].b.clone(),
        }
    }

    /// Reconstruction target in the solver's (possibly centered) frame.
    pub fn target(&self, j: usize) -> DVector<f64> {
        match &self.centering {
            Some(c) => &self.samples[j].x_true - &c.x_mean,
            None => self.samples[j].x_true.clone(),
        }
    }

    /// Map a solver output back to image space.
    pub fn uncenter(&self, x: DVector<f64>) -> DVector<f64> {
        match &self.centering {
            Some(c) => x + &c.x_mean,
            None => x,
        }
    }

    /// Reuse a centering computed elsewhere, e.g. from the training set.
    pub fn with_centering(mut self, centering: Option<Centering>) -> Result<Self> {
        if let Some(c) = &centering {
            check_len(self.geom.len(), c.x_mean.len())?;
            check_len(self.op_invert.nrows(), c.b_mean.len())?;
        }
        self.centering = centering;
        Ok(self)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&j| self.samples[j].clone()).collect(),
            ..self.clone()
        }
    }
}

/// Compute the sample mean and attach it as the set's centering.
pub fn center_data(set: TrainingSet) -> Result<TrainingSet> {
    let xs: Vec<&DVector<f64>> = set.samples.iter().map(|s| &s.x_true).collect();
    let x_mean = mean_of(&xs).ok_or(Error::NotEnoughSamples { needed: 1, got: 0 })?;
    let b_mean = set.op_invert.matvec(&x_mean);
    set.with_centering(Some(Centering { x_mean, b_mean }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub transforms_per_prototype: usize,
    /// `None` keeps prototypes untransformed.
    pub affine: Option<AffineRanges>,
    pub noise: NoiseKind,
    /// Per-sample noise level drawn uniformly from this closed range.
    pub eta_range: (f64, f64),
}

/// Build `|prototypes| * transforms_per_prototype` samples. Sample `j` draws
/// all its randomness from `derive_seed(master_seed, j)`, so generation is
/// parallel and schedule-independent.
pub fn generate_training_set(
    geom: GridGeometry,
    prototypes: &[DVector<f64>],
    spec: &GenerationSpec,
    op_generate: Arc<Operator>,
    op_invert: Arc<Operator>,
    master_seed: u64,
) -> Result<TrainingSet> {
    if prototypes.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    if spec.transforms_per_prototype == 0 {
        return Err(Error::invalid("transforms_per_prototype", "must be at least 1"));
    }
    let (lo, hi) = spec.eta_range;
    if !(0.0 <= lo && lo <= hi && hi < 1.0) {
        return Err(Error::invalid("eta_range", format!("need 0 <= lo <= hi < 1, got [{lo}, {hi}]")));
    }
    for p in prototypes {
        check_len(geom.len(), p.len())?;
    }
    check_len(geom.len(), op_generate.ncols())?;

    let total = prototypes.len() * spec.transforms_per_prototype;
    let samples: Vec<Sample> = (0..total)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng_from_seed(derive_seed(master_seed, j as u64));
            let proto = &prototypes[j / spec.transforms_per_prototype];
            let (x_true, affine) = match &spec.affine {
                Some(ranges) => {
                    let (x, p) = random_affine_transform(proto, geom, ranges, &mut rng);
                    (x, Some(p))
                }
                None => (proto.clone(), None),
            };
            let eta = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let clean = op_generate.matvec(&x_true);
            let b = NoiseModel { kind: spec.noise, level: eta }.corrupt(&clean, &mut rng);
            Sample {
                x_true,
                b,
                eta,
                affine,
            }
        })
        .collect();
    TrainingSet::new(geom, samples, op_generate, op_invert)
}
