//! The bi-level design problem: learn `theta` by minimizing the mean squared
//! reconstruction error over a training set,
//!
//! ```text
//! P(theta) = 1/(2J) sum_j || xhat_j(theta) - x_j ||^2,
//! ```
//!
//! where `xhat_j(theta)` is produced by an inner solver for the variant being
//! learned.

mod density;
mod optimal;
pub mod report;
mod sc;

use std::sync::Mutex;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gengk::{gengk_solve, genhybr_solve, GenGkOptions, GenHybrOptions};
use crate::kernels::{CovarianceOperator, KernelFamily, KernelSpec, Representation};
use crate::lplq::{cgls_solve, mm_gks_solve_with, MmGksOptions};
use crate::noise::TrainingSet;
use crate::operators::{finite_difference_2d, GridGeometry, Operator};
use crate::rng::Rng;
use crate::surrogate::{surrogate_optimize, Bounds, HistoryRow, Scale, SurrogateConfig};

pub use density::{fit_generalized_gaussian, noise_density_diagnostic, DensityDiagnostic, DensityFit};
pub use optimal::{identity_prior_optimal, optimal_lambda_per_image, OptimalLambda};
pub use sc::{sc_fit, sc_objective, sc_probe_terms, ScFit, ScProbes};

/// Which design parameters are learned and which inner solver is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Variant {
    /// Learn `lambda` with fixed exponents.
    LambdaOnly { p: f64, q: f64 },
    /// Learn `lambda`, `p` and `q`.
    LambdaPq,
    /// Learn `lambda` and the kernel hyperparameters.
    LambdaBeta { kernel: KernelFamily },
    /// Learn the kernel hyperparameters; `lambda` is chosen by WGCV inside
    /// every inner solve.
    BetaWgcv { kernel: KernelFamily },
}

impl Variant {
    pub fn label(&self) -> String {
        let fmt = |v: f64| {
            if v.fract() == 0.0 {
                format!("{v:.0}")
            } else {
                format!("{v}")
            }
        };
        match self {
            Self::LambdaOnly { p, q } => format!("lambda-{}-{}", fmt(*p), fmt(*q)),
            Self::LambdaPq => "lambda-p-q".into(),
            Self::LambdaBeta { kernel } => format!("lambda-beta-{}", kernel.name()),
            Self::BetaWgcv { kernel } => format!("beta-wgcv-{}", kernel.name()),
        }
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        match self {
            Self::LambdaOnly { .. } => vec!["lambda"],
            Self::LambdaPq => vec!["lambda", "p", "q"],
            Self::LambdaBeta { kernel: KernelFamily::SquaredExponential } => vec!["lambda", "beta"],
            Self::LambdaBeta { kernel: KernelFamily::Matern } => vec!["lambda", "nu", "length"],
            Self::BetaWgcv { kernel: KernelFamily::SquaredExponential } => vec!["beta"],
            Self::BetaWgcv { kernel: KernelFamily::Matern } => vec!["nu", "length"],
        }
    }

    /// Search box for this variant.
    pub fn bounds(&self, b: &OidBounds) -> Result<Bounds> {
        b.validate()?;
        let lam = (b.lambda.0, b.lambda.1, Scale::Log);
        let kernel = |k: &KernelFamily| match k {
            KernelFamily::SquaredExponential => vec![(b.sqexp_beta.0, b.sqexp_beta.1, Scale::Linear)],
            KernelFamily::Matern => vec![
                (b.matern_nu.0, b.matern_nu.1, Scale::Linear),
                (b.matern_length.0, b.matern_length.1, Scale::Linear),
            ],
        };
        let coords = match self {
            Self::LambdaOnly { .. } => vec![lam],
            Self::LambdaPq => vec![lam, (b.pq.0, b.pq.1, Scale::Linear), (b.pq.0, b.pq.1, Scale::Linear)],
            Self::LambdaBeta { kernel: k } => std::iter::once(lam).chain(kernel(k)).collect(),
            Self::BetaWgcv { kernel: k } => kernel(k),
        };
        Bounds::new(
            coords.iter().map(|c| c.0).collect(),
            coords.iter().map(|c| c.1).collect(),
            coords.iter().map(|c| c.2).collect(),
        )
    }

    /// Interpret a search vector as design parameters.
    pub fn params(&self, theta: &[f64]) -> Result<DesignParams> {
        let n = self.param_names().len();
        if theta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: theta.len(),
            });
        }
        let out = match *self {
            Self::LambdaOnly { p, q } => DesignParams {
                lambda: Some(theta[0]),
                p: Some(p),
                q: Some(q),
                kernel: None,
            },
            Self::LambdaPq => DesignParams {
                lambda: Some(theta[0]),
                p: Some(theta[1]),
                q: Some(theta[2]),
                kernel: None,
            },
            Self::LambdaBeta { kernel } => DesignParams {
                lambda: Some(theta[0]),
                p: None,
                q: None,
                kernel: Some(kernel.with_params(&theta[1..])?),
            },
            Self::BetaWgcv { kernel } => DesignParams {
                lambda: None,
                p: None,
                q: None,
                kernel: Some(kernel.with_params(theta)?),
            },
        };
        Ok(out)
    }

    /// The search vector corresponding to `params`.
    pub fn vector(&self, params: &DesignParams) -> Result<Vec<f64>> {
        let missing = |what: &str| Error::invalid("design parameters", format!("missing {what} for variant {}", self.label()));
        let mut v = Vec::new();
        if !matches!(self, Self::BetaWgcv { .. }) {
            v.push(params.lambda.ok_or_else(|| missing("lambda"))?);
        }
        match self {
            Self::LambdaPq => {
                v.push(params.p.ok_or_else(|| missing("p"))?);
                v.push(params.q.ok_or_else(|| missing("q"))?);
            }
            Self::LambdaBeta { .. } | Self::BetaWgcv { .. } => {
                v.extend(params.kernel.ok_or_else(|| missing("kernel"))?.params());
            }
            Self::LambdaOnly { .. } => {}
        }
        Ok(v)
    }
}

/// Design parameters `theta = [lambda; p; q; beta]`; components not used by
/// a variant are absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub lambda: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub kernel: Option<KernelSpec>,
}

impl DesignParams {
    pub fn lplq(lambda: f64, p: f64, q: f64) -> Self {
        Self {
            lambda: Some(lambda),
            p: Some(p),
            q: Some(q),
            kernel: None,
        }
    }

    pub fn kernel(lambda: Option<f64>, kernel: KernelSpec) -> Self {
        Self {
            lambda,
            p: None,
            q: None,
            kernel: Some(kernel),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }
}

/// Feasible ranges of the design parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OidBounds {
    pub lambda: (f64, f64),
    pub pq: (f64, f64),
    pub sqexp_beta: (f64, f64),
    pub matern_nu: (f64, f64),
    pub matern_length: (f64, f64),
}

impl Default for OidBounds {
    fn default() -> Self {
        Self {
            lambda: (1e-8, 10.0),
            pq: (0.1, 2.5),
            sqexp_beta: (0.01, 0.5),
            matern_nu: (0.5, 15.0),
            matern_length: (0.05, 0.7),
        }
    }
}

impl OidBounds {
    /// Bounds used for kernel hyperparameter learning.
    pub fn kernel_defaults() -> Self {
        Self {
            lambda: (1e-6, 1.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, (lo, hi): (f64, f64)| {
            if lo > 0.0 && lo < hi && hi.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("need 0 < lo < hi, got [{lo}, {hi}]")))
            }
        };
        check("lambda_bounds", self.lambda)?;
        check("pq_bounds", self.pq)?;
        check("sqexp_beta_bounds", self.sqexp_beta)?;
        check("matern_nu_bounds", self.matern_nu)?;
        check("matern_length_bounds", self.matern_length)
    }
}

/// Regularization operator `L` for the Lp-Lq variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularizer {
    #[default]
    Identity,
    Gradient,
}

/// Inner-solver budgets and options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mmgks: MmGksOptions,
    pub cgls_iters: usize,
    pub regularizer: Regularizer,
    pub gengk_iters: usize,
    pub gengk: GenGkOptions,
    pub hybrid: GenHybrOptions,
    pub covariance: Representation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mmgks: MmGksOptions::default(),
            cgls_iters: 100,
            regularizer: Regularizer::Identity,
            gengk_iters: 50,
            gengk: GenGkOptions::default(),
            hybrid: GenHybrOptions::default(),
            covariance: Representation::Auto,
        }
    }
}

/// An inner solver with everything that does not depend on the sample built.
enum Prepared {
    Lplq {
        lambda: f64,
        p: f64,
        q: f64,
        l: Operator,
    },
    Gengk {
        lambda: f64,
        q: CovarianceOperator,
    },
    Hybrid {
        q: CovarianceOperator,
    },
}

impl Prepared {
    fn new(params: &DesignParams, geom: GridGeometry, cfg: &SolverConfig) -> Result<Self> {
        match (params.kernel, params.lambda, params.p, params.q) {
            (None, Some(lambda), Some(p), Some(q)) => {
                let l = match cfg.regularizer {
                    Regularizer::Identity => Operator::identity(geom.len()),
                    Regularizer::Gradient => finite_difference_2d(geom)?.into(),
                };
                Ok(Self::Lplq { lambda, p, q, l })
            }
            (Some(kernel), Some(lambda), None, None) => Ok(Self::Gengk {
                lambda,
                q: CovarianceOperator::new(kernel, geom, cfg.covariance)?,
            }),
            (Some(kernel), None, None, None) => Ok(Self::Hybrid {
                q: CovarianceOperator::new(kernel, geom, cfg.covariance)?,
            }),
            _ => Err(Error::invalid("design parameters", "inconsistent combination of components")),
        }
    }

    /// Reconstruct from `b`; also returns the regularization parameter used.
    fn solve(&self, a: &Operator, b: &DVector<f64>, cfg: &SolverConfig) -> Result<(DVector<f64>, f64)> {
        let x = match self {
            Self::Lplq { lambda, p, q, l } => {
                let x = if *p == 2.0 && *q == 2.0 {
                    cgls_solve(a, b, l, *lambda, cfg.cgls_iters)?
                } else {
                    mm_gks_solve_with(a, b, l, *lambda, *p, *q, &cfg.mmgks)?.x
                };
                (x, *lambda)
            }
            Self::Gengk { lambda, q } => (gengk_solve(a, q, b, *lambda, cfg.gengk_iters, &cfg.gengk)?.x, *lambda),
            Self::Hybrid { q } => {
                let out = genhybr_solve(a, q, b, &cfg.hybrid)?;
                (out.x, out.lambda)
            }
        };
        if x.0.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::Breakdown("inner solver produced non-finite values".into()))
        }
    }
}

/// One reconstruction per sample (still centered if the set is centered)
/// with the regularization parameter each used.
pub fn reconstruct_centered(
    params: &DesignParams,
    set: &TrainingSet,
    cfg: &SolverConfig,
) -> Result<Vec<(DVector<f64>, f64)>> {
    let prepared = Prepared::new(params, set.geom, cfg)?;
    (0..set.len())
        .into_par_iter()
        .map(|j| prepared.solve(&set.op_invert, &set.rhs(j), cfg))
        .collect()
}

/// Reconstructions in the original (uncentered) image space.
pub fn reconstruct(params: &DesignParams, set: &TrainingSet, cfg: &SolverConfig) -> Result<Vec<DVector<f64>>> {
    Ok(reconstruct_centered(params, set, cfg)?
        .into_iter()
        .map(|(x, _)| set.uncenter(x))
        .collect())
}

fn squared_errors(params: &DesignParams, set: &TrainingSet, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let xs = reconstruct_centered(params, set, cfg)?;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(j, (x, _))| (x - set.target(j)).norm_squared())
        .collect())
}

/// `P(theta)`; inner-solver failures give `+inf`.
pub fn design_objective(params: &DesignParams, set: &TrainingSet, cfg: &SolverConfig) -> f64 {
    if set.is_empty() {
        return f64::INFINITY;
    }
    match squared_errors(params, set, cfg) {
        Ok(errs) => {
            let total: f64 = errs.iter().sum();
            let p = total / (2.0 * set.len() as f64);
            if p.is_finite() {
                p
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// `P` as a function of the search vector of a variant, with a cache of
/// previously evaluated points.
pub struct DesignObjective<'a> {
    pub set: &'a TrainingSet,
    pub variant: Variant,
    pub solver: SolverConfig,
    cache: Mutex<Vec<(Vec<f64>, f64)>>,
}

impl<'a> DesignObjective<'a> {
    pub fn new(set: &'a TrainingSet, variant: Variant, solver: SolverConfig) -> Self {
        Self {
            set,
            variant,
            solver,
            cache: Mutex::new(Vec::new()),
        }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        let cached = self.cache.lock().expect("cache lock").iter().find_map(|(t, v)| {
            let close = t.len() == theta.len() && t.iter().zip(theta).all(|(a, b)| (a - b).abs() <= 1e-12);
            close.then_some(*v)
        });
        if let Some(v) = cached {
            return v;
        }
        let v = match self.variant.params(theta) {
            Ok(params) => design_objective(&params, self.set, &self.solver),
            Err(_) => f64::INFINITY,
        };
        self.cache.lock().expect("cache lock").push((theta.to_vec(), v));
        v
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub max_evals: usize,
    pub surrogate: SurrogateConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            max_evals: 200,
            surrogate: SurrogateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OidResult {
    pub variant: Variant,
    pub theta: DesignParams,
    pub theta_vector: Vec<f64>,
    pub param_names: Vec<String>,
    pub training_objective: f64,
    pub evaluations: usize,
    pub initial_points: usize,
    #[serde(skip)]
    pub history: Vec<HistoryRow>,
}

/// Learn the design parameters of `variant` on `set`.
pub fn oid_learn(
    set: &TrainingSet,
    variant: Variant,
    bounds: &OidBounds,
    learn: &LearnConfig,
    solver: &SolverConfig,
    rng: &mut Rng,
) -> Result<OidResult> {
    if set.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    let box_bounds = variant.bounds(bounds)?;
    let objective = DesignObjective::new(set, variant, *solver);
    let res = surrogate_optimize(|t| objective.eval(t), &box_bounds, learn.max_evals, &learn.surrogate, rng)?;
    Ok(OidResult {
        variant,
        theta: variant.params(&res.theta)?,
        theta_vector: res.theta,
        param_names: variant.param_names().iter().map(|s| s.to_string()).collect(),
        training_objective: res.value,
        evaluations: res.history.len(),
        initial_points: res.initial_points,
        history: res.history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `||xhat_j - x_j|| / ||x_j||` in the original image space.
    pub rre: Vec<f64>,
    /// Regularization parameter used per sample.
    pub lambdas: Vec<f64>,
    /// `1/(2J) sum_j ||xhat_j - x_j||^2`.
    pub mean_objective: f64,
}

pub fn relative_error(x: &DVector<f64>, x_true: &DVector<f64>) -> f64 {
    let denom = x_true.norm();
    if denom > 0.0 {
        (x - x_true).norm() / denom
    } else {
        (x - x_true).norm()
    }
}

/// Reconstruct every sample of `set` at `params` and report errors.
pub fn validate(params: &DesignParams, set: &TrainingSet, cfg: &SolverConfig) -> Result<ValidationReport> {
    if set.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    let xs = reconstruct_centered(params, set, cfg)?;
    let mut rre = Vec::with_capacity(xs.len());
    let mut lambdas = Vec::with_capacity(xs.len());
    let mut total = 0.0;
    for (j, (x, lam)) in xs.iter().enumerate() {
        total += (x - set.target(j)).norm_squared();
        rre.push(relative_error(&set.uncenter(x.clone()), &set.samples[j].x_true));
        lambdas.push(*lam);
    }
    Ok(ValidationReport {
        rre,
        lambdas,
        mean_objective: total / (2.0 * set.len() as f64),
    })
}
