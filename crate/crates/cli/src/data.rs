//! Building, saving and loading training and validation sets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use oid_core::matrix_file::{read_vector, write_vector};
use oid_core::noise::{center_data, generate_training_set, AffineParams, Centering, GenerationSpec, Sample, TrainingSet};
use oid_core::operators::{build_tomo_operator, BlurOperator};
use oid_core::rng::{derive_seed, rng_from_seed, stream};
use oid_core::{GridGeometry, LinearOperator, Operator};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Problem};
use crate::CliError;

/// Prototype `k` of a set seeded with `set_seed`; kept apart from the
/// per-sample streams, which use small indices.
const PROTOTYPE_STREAM: u64 = 1 << 32;

pub struct Experiment {
    pub train: TrainingSet,
    pub validation: TrainingSet,
}

pub fn geometry(cfg: &ExperimentConfig) -> Result<GridGeometry, CliError> {
    GridGeometry::new(cfg.geometry.nx, cfg.geometry.ny).map_err(|e| CliError::Validation(format!("`geometry`: {e}")))
}

/// The operator that generates data and the one used for inversion.
pub fn operators(cfg: &ExperimentConfig) -> Result<(Arc<Operator>, Arc<Operator>), CliError> {
    let g = geometry(cfg)?;
    match cfg.problem {
        Problem::Deblur => {
            let [a, b] = cfg.operator.generate_sigma;
            let [c, d] = cfg.operator.invert_sigma;
            let gen = Operator::from(BlurOperator::gaussian(g, a, b)?);
            let inv = Operator::from(BlurOperator::gaussian(g, c, d)?);
            Ok((Arc::new(gen), Arc::new(inv)))
        }
        Problem::Tomography => {
            let op = Arc::new(Operator::from(build_tomo_operator(g, cfg.operator.sources, cfg.operator.receivers)?));
            Ok((op.clone(), op))
        }
    }
}

fn build_set(
    cfg: &ExperimentConfig,
    set_seed: u64,
    prototypes: usize,
    transforms: usize,
    ops: &(Arc<Operator>, Arc<Operator>),
) -> Result<TrainingSet, CliError> {
    let g = geometry(cfg)?;
    let kind = cfg.prototype_kind();
    let protos: Vec<DVector<f64>> = (0..prototypes as u64)
        .map(|k| kind.generate(g, &mut rng_from_seed(derive_seed(set_seed, PROTOTYPE_STREAM + k))))
        .collect();
    let spec = GenerationSpec {
        transforms_per_prototype: transforms,
        affine: cfg.training.affine,
        noise: cfg.noise_kind(),
        eta_range: cfg.eta_range(),
    };
    Ok(generate_training_set(g, &protos, &spec, ops.0.clone(), ops.1.clone(), set_seed)?)
}

/// Generate both sets from the master seed. Validation images come from
/// their own prototypes and share the training centering.
pub fn simulate_sets(cfg: &ExperimentConfig) -> Result<Experiment, CliError> {
    let ops = operators(cfg)?;
    let t = &cfg.training;
    let mut train = build_set(cfg, derive_seed(cfg.seed, stream::DATA), t.train_prototypes, t.train_transforms, &ops)?;
    let mut validation = build_set(
        cfg,
        derive_seed(cfg.seed, stream::VALIDATION),
        t.validation_prototypes,
        t.validation_transforms,
        &ops,
    )?;
    if t.center {
        train = center_data(train)?;
        validation = validation.with_centering(train.centering.clone())?;
    }
    Ok(Experiment { train, validation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub eta: f64,
    pub affine: Option<AffineParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub problem: Problem,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub observations: usize,
    pub centered: bool,
    pub train: Vec<SampleMeta>,
    pub validation: Vec<SampleMeta>,
}

pub fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.dir.join("data")
}

fn save_set(dir: &Path, set: &TrainingSet) -> Result<Vec<SampleMeta>, CliError> {
    std::fs::create_dir_all(dir)?;
    set.samples
        .iter()
        .enumerate()
        .map(|(j, s)| {
            write_vector(&dir.join(format!("x_{j:04}.oidm")), &s.x_true)?;
            write_vector(&dir.join(format!("b_{j:04}.oidm")), &s.b)?;
            Ok(SampleMeta {
                eta: s.eta,
                affine: s.affine,
            })
        })
        .collect()
}

pub fn save_experiment(cfg: &ExperimentConfig, exp: &Experiment) -> Result<PathBuf, CliError> {
    let dir = data_dir(cfg);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create output directory {}: {e}", dir.display())))?;
    let train = save_set(&dir.join("train"), &exp.train)?;
    let validation = save_set(&dir.join("validation"), &exp.validation)?;
    if let Some(c) = &exp.train.centering {
        write_vector(&dir.join("x_mean.oidm"), &c.x_mean)?;
        write_vector(&dir.join("b_mean.oidm"), &c.b_mean)?;
    }
    let manifest = Manifest {
        problem: cfg.problem,
        seed: cfg.seed,
        nx: exp.train.geom.nx,
        ny: exp.train.geom.ny,
        observations: exp.train.op_invert.nrows(),
        centered: exp.train.centering.is_some(),
        train,
        validation,
    };
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

fn load_set(
    dir: &Path,
    meta: &[SampleMeta],
    g: GridGeometry,
    ops: &(Arc<Operator>, Arc<Operator>),
    centering: Option<Centering>,
) -> Result<TrainingSet, CliError> {
    let samples = meta
        .iter()
        .enumerate()
        .map(|(j, m)| {
            Ok(Sample {
                x_true: read_vector(&dir.join(format!("x_{j:04}.oidm")))?,
                b: read_vector(&dir.join(format!("b_{j:04}.oidm")))?,
                eta: m.eta,
                affine: m.affine,
            })
        })
        .collect::<Result<Vec<_>, oid_core::Error>>()?;
    Ok(TrainingSet::new(g, samples, ops.0.clone(), ops.1.clone())?.with_centering(centering)?)
}

/// Load the sets written by `simulate`; operators are rebuilt from `cfg`.
pub fn load_experiment(cfg: &ExperimentConfig) -> Result<Experiment, CliError> {
    let dir = data_dir(cfg);
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Err(CliError::Runtime(format!(
            "missing data set {}; run `oid simulate` with this configuration first",
            path.display()
        )));
    }
    let manifest: Manifest = read_json(&path)?;
    let g = geometry(cfg)?;
    if (manifest.nx, manifest.ny) != (g.nx, g.ny) || manifest.problem != cfg.problem {
        return Err(CliError::Runtime(format!(
            "data in {} was simulated for a different problem or geometry; run `oid simulate` again",
            dir.display()
        )));
    }
    let ops = operators(cfg)?;
    let centering = if manifest.centered {
        Some(Centering {
            x_mean: read_vector(&dir.join("x_mean.oidm"))?,
            b_mean: read_vector(&dir.join("b_mean.oidm"))?,
        })
    } else {
        None
    };
    let train = load_set(&dir.join("train"), &manifest.train, g, &ops, centering.clone())?;
    let validation = load_set(&dir.join("validation"), &manifest.validation, g, &ops, centering)?;
    Ok(Experiment { train, validation })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("malformed {}: {e}", path.display())))
}
