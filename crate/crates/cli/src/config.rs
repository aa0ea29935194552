//! Experiment configuration: a TOML document with nested sections. Every
//! field except `problem` and `seed` has a default; unknown keys are errors.

use std::path::PathBuf;

use oid_core::kernels::{KernelFamily, Representation};
use oid_core::lplq::{EpsilonPolicy, Expansion, MmGksOptions, SmoothingConfig};
use oid_core::noise::{AffineRanges, NoiseKind, PrototypeKind};
use oid_core::oid::{LearnConfig, OidBounds, Regularizer, SolverConfig, Variant};
use oid_core::surrogate::SurrogateConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Deblur,
    Tomography,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub seed: u64,
    /// Worker threads for per-sample solves; 0 uses every logical core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub surrogate: SurrogateSection,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_variant() -> Variant {
    Variant::LambdaPq
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { nx: 32, ny: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    /// Blur widths `[sigma1, sigma2]` in pixels used to generate data.
    pub generate_sigma: [f64; 2],
    /// Blur widths assumed when inverting.
    pub invert_sigma: [f64; 2],
    pub sources: usize,
    pub receivers: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            generate_sigma: [2.5, 2.5],
            invert_sigma: [2.5, 3.2],
            sources: 24,
            receivers: 48,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: Option<NoiseKind>,
    /// Per-sample relative noise level drawn uniformly from this range.
    pub eta: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub prototypes: Option<PrototypeKind>,
    pub train_prototypes: usize,
    pub train_transforms: usize,
    pub validation_prototypes: usize,
    pub validation_transforms: usize,
    pub affine: Option<AffineRanges>,
    pub center: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            prototypes: None,
            train_prototypes: 4,
            train_transforms: 4,
            validation_prototypes: 2,
            validation_transforms: 4,
            affine: Some(AffineRanges::default()),
            center: true,
        }
    }
}

fn check_range(key: &str, (lo, hi): (f64, f64)) -> Result<(), CliError> {
    if lo > 0.0 && lo < hi && hi.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("`{key}`: need 0 < lo < hi, got [{lo}, {hi}]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub lambda_bounds: Option<[f64; 2]>,
    pub pq_bounds: [f64; 2],
    pub sqexp_beta_bounds: [f64; 2],
    pub matern_nu_bounds: [f64; 2],
    pub matern_length_bounds: [f64; 2],
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let d = OidBounds::default();
        Self {
            lambda_bounds: None,
            pq_bounds: d.pq.into(),
            sqexp_beta_bounds: d.sqexp_beta.into(),
            matern_nu_bounds: d.matern_nu.into(),
            matern_length_bounds: d.matern_length.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub mmgks_iters: usize,
    pub mmgks_initial_dim: usize,
    pub mmgks_tol: f64,
    pub mmgks_expansion: Expansion,
    pub epsilon: f64,
    pub epsilon_policy: EpsilonPolicy,
    pub cgls_iters: usize,
    pub regularizer: Regularizer,
    pub gengk_iters: usize,
    pub hybrid_iters: usize,
    /// WGCV weight, ignored when `adaptive_omega` is set.
    pub wgcv_omega: f64,
    pub adaptive_omega: bool,
    pub covariance: Representation,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            mmgks_iters: d.mmgks.max_iters,
            mmgks_initial_dim: d.mmgks.initial_dim,
            mmgks_tol: d.mmgks.tol,
            mmgks_expansion: d.mmgks.expansion,
            epsilon: d.mmgks.smoothing.epsilon,
            epsilon_policy: d.mmgks.smoothing.policy,
            cgls_iters: d.cgls_iters,
            regularizer: d.regularizer,
            gengk_iters: d.gengk_iters,
            hybrid_iters: d.hybrid.k_max,
            wgcv_omega: d.hybrid.omega.unwrap_or(1.0),
            adaptive_omega: d.hybrid.omega.is_none(),
            covariance: d.covariance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    pub max_evals: usize,
    pub initial_points: Option<usize>,
    pub candidates_per_dim: usize,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        let d = SurrogateConfig::default();
        Self {
            max_evals: 60,
            initial_points: d.initial_points,
            candidates_per_dim: d.candidates_per_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Compute per-image optimal `lambda` alongside validation.
    pub per_image_optimal: bool,
    /// Identity-prior Tikhonov with per-image optimal `lambda`.
    pub identity_baseline: bool,
    /// Sample-covariance baseline for kernel variants; 0 disables it.
    pub sc_probes: usize,
    /// Points per axis of the design-surface grid; 0 disables it.
    pub surface_points: usize,
    pub histogram_bins: usize,
    pub density_bins: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            per_image_optimal: true,
            identity_baseline: false,
            sc_probes: 0,
            surface_points: 0,
            histogram_bins: 20,
            density_bins: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn noise_kind(&self) -> NoiseKind {
        self.noise.kind.unwrap_or(match self.problem {
            Problem::Deblur => NoiseKind::Impulse,
            Problem::Tomography => NoiseKind::Gaussian,
        })
    }

    pub fn eta_range(&self) -> (f64, f64) {
        let [lo, hi] = self.noise.eta.unwrap_or(match self.problem {
            Problem::Deblur => [0.1, 0.5],
            Problem::Tomography => [0.01, 0.1],
        });
        (lo, hi)
    }

    pub fn prototype_kind(&self) -> PrototypeKind {
        self.training.prototypes.unwrap_or(match self.problem {
            Problem::Deblur => PrototypeKind::Blobs,
            Problem::Tomography => PrototypeKind::Smooth,
        })
    }

    pub fn oid_bounds(&self) -> OidBounds {
        let b = &self.bounds;
        let lambda = b.lambda_bounds.map(|[lo, hi]| (lo, hi)).unwrap_or(match self.variant {
            Variant::LambdaOnly { .. } | Variant::LambdaPq => OidBounds::default().lambda,
            _ => OidBounds::kernel_defaults().lambda,
        });
        OidBounds {
            lambda,
            pq: b.pq_bounds.into(),
            sqexp_beta: b.sqexp_beta_bounds.into(),
            matern_nu: b.matern_nu_bounds.into(),
            matern_length: b.matern_length_bounds.into(),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let d = SolverConfig::default();
        SolverConfig {
            mmgks: MmGksOptions {
                max_iters: s.mmgks_iters,
                initial_dim: s.mmgks_initial_dim,
                tol: s.mmgks_tol,
                expansion: s.mmgks_expansion,
                smoothing: SmoothingConfig {
                    epsilon: s.epsilon,
                    policy: s.epsilon_policy,
                },
                record_trace: false,
            },
            cgls_iters: s.cgls_iters,
            regularizer: s.regularizer,
            gengk_iters: s.gengk_iters,
            gengk: d.gengk,
            hybrid: oid_core::gengk::GenHybrOptions {
                k_max: s.hybrid_iters,
                omega: (!s.adaptive_omega).then_some(s.wgcv_omega),
                ..d.hybrid
            },
            covariance: s.covariance,
        }
    }

    pub fn learn_config(&self) -> LearnConfig {
        LearnConfig {
            max_evals: self.surrogate.max_evals,
            surrogate: SurrogateConfig {
                initial_points: self.surrogate.initial_points,
                candidates_per_dim: self.surrogate.candidates_per_dim,
                ..SurrogateConfig::default()
            },
        }
    }

    /// Kernel family of the configured variant, if it learns one.
    pub fn kernel_family(&self) -> Option<KernelFamily> {
        match self.variant {
            Variant::LambdaBeta { kernel } | Variant::BetaWgcv { kernel } => Some(kernel),
            _ => None,
        }
    }

    /// Checks that serde cannot express. Errors name the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let v = |msg: String| Err(CliError::Validation(msg));
        if self.geometry.nx < 2 || self.geometry.ny < 2 {
            return v(format!(
                "`geometry`: need at least 2x2 pixels, got {}x{}",
                self.geometry.nx, self.geometry.ny
            ));
        }
        for (key, s) in [("operator.generate_sigma", self.operator.generate_sigma), ("operator.invert_sigma", self.operator.invert_sigma)] {
            if !(s[0] > 0.0 && s[1] > 0.0 && s.iter().all(|x| x.is_finite())) {
                return v(format!("`{key}`: blur widths must be positive, got {s:?}"));
            }
        }
        if self.problem == Problem::Tomography && (self.operator.sources == 0 || self.operator.receivers == 0) {
            return v("`operator.sources`/`operator.receivers`: need at least one of each".into());
        }
        let (lo, hi) = self.eta_range();
        if !(0.0 <= lo && lo <= hi && hi < 1.0) {
            return v(format!("`noise.eta`: need 0 <= lo <= hi < 1, got [{lo}, {hi}]"));
        }
        let t = &self.training;
        for (key, n) in [
            ("training.train_prototypes", t.train_prototypes),
            ("training.train_transforms", t.train_transforms),
            ("training.validation_prototypes", t.validation_prototypes),
            ("training.validation_transforms", t.validation_transforms),
        ] {
            if n == 0 {
                return v(format!("`{key}`: must be at least 1"));
            }
        }
        if let Some(a) = &t.affine {
            if !(a.scale_min > 0.0 && a.scale_min <= a.scale_max) {
                return v(format!("`training.affine`: need 0 < scale_min <= scale_max, got [{}, {}]", a.scale_min, a.scale_max));
            }
        }
        let b = self.oid_bounds();
        check_range("bounds.lambda_bounds", b.lambda)?;
        check_range("bounds.pq_bounds", b.pq)?;
        check_range("bounds.sqexp_beta_bounds", b.sqexp_beta)?;
        check_range("bounds.matern_nu_bounds", b.matern_nu)?;
        check_range("bounds.matern_length_bounds", b.matern_length)?;
        if let Variant::LambdaOnly { p, q } = self.variant {
            if !(p > 0.0 && q > 0.0) {
                return v(format!("`variant`: exponents must be positive, got p = {p}, q = {q}"));
            }
        }
        let s = &self.solver;
        if s.mmgks_iters == 0 || s.cgls_iters == 0 || s.gengk_iters == 0 || s.hybrid_iters == 0 {
            return v("`solver`: iteration budgets must be at least 1".into());
        }
        if !(s.epsilon > 0.0 && s.epsilon.is_finite()) {
            return v(format!("`solver.epsilon`: must be positive, got {}", s.epsilon));
        }
        if !(s.wgcv_omega > 0.0 && s.wgcv_omega.is_finite()) {
            return v(format!("`solver.wgcv_omega`: must be positive, got {}", s.wgcv_omega));
        }
        if self.surrogate.max_evals < 2 {
            return v("`surrogate.max_evals`: need at least 2 evaluations".into());
        }
        if self.surrogate.candidates_per_dim == 0 {
            return v("`surrogate.candidates_per_dim`: must be at least 1".into());
        }
        Ok(())
    }
}
