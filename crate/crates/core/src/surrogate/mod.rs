//! Bound-constrained global minimization of expensive black-box functions
//! with a cubic RBF surrogate.
//!
//! The search runs in the unit cube: each coordinate is mapped linearly, or
//! linearly in `log10`, onto `[0, 1]`. After a Latin hypercube design, each
//! step fits the surrogate to every evaluation so far and evaluates the
//! objective at the candidate with the best weighted score of predicted
//! value and distance to previous samples. The weight cycles so that
//! exploratory and greedy steps alternate.

mod rbf;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub use rbf::RbfModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Linear,
    Log,
}

/// Box `[lo, hi]` with a per-coordinate search scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub scale: Vec<Scale>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, scale: Vec<Scale>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() != scale.len() {
            return Err(Error::invalid("bounds", "lo, hi and scale must have the same nonzero length"));
        }
        for i in 0..lo.len() {
            if !(lo[i] < hi[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::invalid("bounds", format!("coordinate {i}: need lo < hi, got [{}, {}]", lo[i], hi[i])));
            }
            if scale[i] == Scale::Log && lo[i] <= 0.0 {
                return Err(Error::invalid("bounds", format!("coordinate {i}: log scale needs lo > 0")));
            }
        }
        Ok(Self { lo, hi, scale })
    }

    pub fn linear(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let scale = vec![Scale::Linear; lo.len()];
        Self::new(lo, hi, scale)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn to_unit(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| match self.scale[i] {
                Scale::Linear => (theta[i] - self.lo[i]) / (self.hi[i] - self.lo[i]),
                Scale::Log => (theta[i].ln() - self.lo[i].ln()) / (self.hi[i].ln() - self.lo[i].ln()),
            })
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let t = u[i].clamp(0.0, 1.0);
                let v = match self.scale[i] {
                    Scale::Linear => self.lo[i] + t * (self.hi[i] - self.lo[i]),
                    Scale::Log => (self.lo[i].ln() + t * (self.hi[i].ln() - self.lo[i].ln())).exp(),
                };
                v.clamp(self.lo[i], self.hi[i])
            })
            .collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && (0..self.dim()).all(|i| theta[i] >= self.lo[i] && theta[i] <= self.hi[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Candidates scored per step, per dimension.
    pub candidates_per_dim: usize,
    /// Weight on the predicted value; the remainder goes to distance.
    pub weight_cycle: Vec<f64>,
    /// Initial standard deviation of incumbent perturbations (unit cube).
    pub sigma_init: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Consecutive successes before the perturbation radius doubles.
    pub success_tol: usize,
    /// Size of the initial design; `None` uses the default rule.
    pub initial_points: Option<usize>,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            candidates_per_dim: 500,
            weight_cycle: vec![0.3, 0.5, 0.8, 0.95],
            sigma_init: 0.1,
            sigma_min: 0.1 / 64.0,
            sigma_max: 0.2,
            success_tol: 3,
            initial_points: None,
        }
    }
}

impl SurrogateConfig {
    /// `ceil(max_evals / 4)` capped at `2(d+1) + 10`, but at least `d + 2`.
    pub fn initial_design_size(&self, dim: usize, max_evals: usize) -> usize {
        let n = self
            .initial_points
            .unwrap_or_else(|| max_evals.div_ceil(4).min(2 * (dim + 1) + 10).max(dim + 2));
        n.clamp(1, max_evals)
    }
}

/// Evaluations so far, the fitted surrogate and the search radius.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    /// Sample locations in unit-cube coordinates.
    pub points: Vec<Vec<f64>>,
    /// Objective values; `+inf` marks failed evaluations.
    pub values: Vec<f64>,
    pub model: RbfModel,
    pub best: usize,
    pub sigma: f64,
    successes: usize,
    failures: usize,
}

/// Fit the surrogate to unit-cube samples. Values above the median of the
/// finite values are capped at the median before fitting, so that a few very
/// poor samples do not flatten the model where the minimum lies; failed
/// (`+inf`) samples are capped the same way.
pub fn rbf_fit(points: Vec<Vec<f64>>, values: Vec<f64>, sigma: f64) -> Result<SurrogateState> {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let cap = if finite.is_empty() { 0.0 } else { finite[(finite.len() - 1) / 2] };
    let fit_values: Vec<f64> = values.iter().map(|&v| v.min(cap)).collect();
    let model = RbfModel::fit(&points, &fit_values)?;
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(SurrogateState {
        points,
        values,
        model,
        best,
        sigma,
        successes: 0,
        failures: 0,
    })
}

fn nearest_distance(points: &[Vec<f64>], x: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

fn min_separation(dim: usize) -> f64 {
    1e-6 * (dim as f64).sqrt()
}

fn draw_candidates(state: &SurrogateState, dim: usize, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let incumbent = &state.points[state.best];
    let normal = Normal::new(0.0, state.sigma).expect("positive radius");
    let half = count / 2;
    let mut out = Vec::with_capacity(count);
    for _ in 0..half {
        out.push(incumbent.iter().map(|&c| (c + normal.sample(rng)).clamp(0.0, 1.0)).collect());
    }
    for _ in half..count {
        out.push((0..dim).map(|_| rng.random::<f64>()).collect());
    }
    out
}

/// Pick the best-scoring candidate for the given weight on predicted value.
/// Candidates within the minimum separation of existing samples are skipped;
/// if none remain, the incumbent is perturbed until a new point is found.
pub fn select_candidate(state: &SurrogateState, candidates: &[Vec<f64>], weight: f64, rng: &mut Rng) -> Vec<f64> {
    let dim = state.points[0].len();
    let delta = min_separation(dim);
    let scored: Vec<(usize, f64, f64)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (i, state.model.eval(c), nearest_distance(&state.points, c)))
        .filter(|(_, _, d)| *d >= delta)
        .collect();
    if scored.is_empty() {
        return perturbation_fallback(state, rng);
    }
    let (smin, smax) = scored.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.1), hi.max(s.1)));
    let (dmin, dmax) = scored.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.2), hi.max(s.2)));
    let norm_s = |s: f64| if smax > smin { (s - smin) / (smax - smin) } else { 1.0 };
    let norm_d = |d: f64| if dmax > dmin { (dmax - d) / (dmax - dmin) } else { 1.0 };
    let best = scored
        .iter()
        .map(|&(i, s, d)| (i, weight * norm_s(s) + (1.0 - weight) * norm_d(d)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    candidates[best.0].clone()
}

fn perturbation_fallback(state: &SurrogateState, rng: &mut Rng) -> Vec<f64> {
    let dim = state.points[0].len();
    let delta = min_separation(dim);
    let incumbent = &state.points[state.best];
    let mut radius = state.sigma.max(1e-3);
    for _ in 0..100 {
        let normal = Normal::new(0.0, radius).expect("positive radius");
        let x: Vec<f64> = incumbent.iter().map(|&c| (c + normal.sample(rng)).clamp(0.0, 1.0)).collect();
        if nearest_distance(&state.points, &x) >= delta {
            return x;
        }
        radius = (radius * 2.0).min(1.0);
    }
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// Next point to evaluate, in original coordinates.
pub fn acquisition_next(
    state: &SurrogateState,
    bounds: &Bounds,
    cfg: &SurrogateConfig,
    rng: &mut Rng,
    cycle_index: usize,
) -> Vec<f64> {
    let weight = cfg.weight_cycle[cycle_index % cfg.weight_cycle.len()];
    acquisition_with_weight(state, bounds, cfg, rng, weight)
}

/// [`acquisition_next`] with an explicit weight on the predicted value.
pub fn acquisition_with_weight(
    state: &SurrogateState,
    bounds: &Bounds,
    cfg: &SurrogateConfig,
    rng: &mut Rng,
    weight: f64,
) -> Vec<f64> {
    let dim = bounds.dim();
    let candidates = draw_candidates(state, dim, cfg.candidates_per_dim.max(1) * dim, rng);
    bounds.from_unit(&select_candidate(state, &candidates, weight, rng))
}

/// Latin hypercube sample of `n` points in the unit cube.
pub fn latin_hypercube(n: usize, dim: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in pts.iter_mut().zip(strata) {
            p[d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub eval: usize,
    pub theta: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct SurrogateResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub history: Vec<HistoryRow>,
    pub initial_points: usize,
}

/// Minimize `objective` over `bounds` with at most `max_evals` evaluations.
/// Non-finite objective values are recorded as `+inf`.
pub fn surrogate_optimize<F>(
    mut objective: F,
    bounds: &Bounds,
    max_evals: usize,
    cfg: &SurrogateConfig,
    rng: &mut Rng,
) -> Result<SurrogateResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = bounds.dim();
    if max_evals < dim + 2 {
        return Err(Error::invalid("max_evals", format!("need at least {} evaluations, got {max_evals}", dim + 2)));
    }
    if cfg.weight_cycle.is_empty() || cfg.weight_cycle.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::invalid("weight_cycle", "weights must be in [0, 1] and nonempty"));
    }
    if !(cfg.sigma_min > 0.0 && cfg.sigma_min <= cfg.sigma_init && cfg.sigma_init <= cfg.sigma_max) {
        return Err(Error::invalid("sigma", "need 0 < sigma_min <= sigma_init <= sigma_max"));
    }
    let mut eval = |theta: &[f64], history: &mut Vec<HistoryRow>| {
        let v = objective(theta);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        history.push(HistoryRow {
            eval: history.len(),
            theta: theta.to_vec(),
            value: v,
        });
        v
    };

    let n0 = cfg.initial_design_size(dim, max_evals);
    let mut history = Vec::with_capacity(max_evals);
    let mut points = latin_hypercube(n0, dim, rng);
    let mut values = Vec::with_capacity(max_evals);
    for u in &mut points {
        let theta = bounds.from_unit(u);
        *u = bounds.to_unit(&theta);
        values.push(eval(&theta, &mut history));
    }
    let mut state = rbf_fit(points, values, cfg.sigma_init)?;
    let fail_tol = dim.max(5);

    for cycle in 0..max_evals - n0 {
        let theta = acquisition_next(&state, bounds, cfg, rng, cycle);
        let value = eval(&theta, &mut history);
        let incumbent = state.values[state.best];
        let improved = value < incumbent - 1e-3 * incumbent.abs();
        let (mut successes, mut failures, mut sigma) = (state.successes, state.failures, state.sigma);
        if improved {
            successes += 1;
            failures = 0;
        } else {
            failures += 1;
            successes = 0;
        }
        if successes >= cfg.success_tol {
            sigma = (2.0 * sigma).min(cfg.sigma_max);
            successes = 0;
        }
        if failures >= fail_tol {
            sigma = (0.5 * sigma).max(cfg.sigma_min);
            failures = 0;
        }
        let mut points = std::mem::take(&mut state.points);
        let mut values = std::mem::take(&mut state.values);
        points.push(bounds.to_unit(&theta));
        values.push(value);
        state = rbf_fit(points, values, sigma)?;
        state.successes = successes;
        state.failures = failures;
    }

    let best = &history[state.best];
    Ok(SurrogateResult {
        theta: best.theta.clone(),
        value: best.value,
        history,
        initial_points: n0,
    })
}
