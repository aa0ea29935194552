use std::path::{Path, PathBuf};

use clap::ValueEnum;
use oid_core::matrix_file::write_vector;
use oid_core::oid::report::{self, ParamsRow, Table};
use oid_core::oid::{
    design_objective, identity_prior_optimal, noise_density_diagnostic, oid_learn, optimal_lambda_per_image, reconstruct,
    sc_fit, validate, DesignParams, OptimalLambda, Variant,
};
use oid_core::rng::{stream, substream};
use oid_core::surrogate::Scale;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{load_experiment, read_json, save_experiment, simulate_sets, write_json, Experiment};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Learn,
    Validate,
    Reconstruct,
    Report,
}

/// The persisted outcome of `learn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedRecord {
    pub method: String,
    pub variant: Variant,
    pub seed: u64,
    pub param_names: Vec<String>,
    pub theta_vector: Vec<f64>,
    pub theta: DesignParams,
    pub training_objective: f64,
    pub evaluations: usize,
    pub initial_points: usize,
}

/// The persisted outcome of `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub method: String,
    pub mean_objective: f64,
    pub mean_rre: f64,
    pub rre: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Per-image optimal `lambda` at the learned remaining parameters.
    pub optimal: Option<Vec<OptimalLambda>>,
}

fn method_name(v: &Variant) -> String {
    report::method_label(v)
}

fn learned_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.dir.join("learned").join(format!("{}.json", method_name(&cfg.variant)))
}

fn validation_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.dir.join("validation")
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn load_learned(cfg: &ExperimentConfig) -> Result<LearnedRecord, CliError> {
    let path = learned_path(cfg);
    if !path.exists() {
        return Err(CliError::Runtime(format!(
            "missing learned parameters {}; run `oid learn` with this configuration first",
            path.display()
        )));
    }
    read_json(&path)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Run one stage; returns the paths of the artifacts written.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match cmd {
        Command::Simulate => simulate(cfg),
        Command::Learn => learn(cfg),
        Command::Validate => validate_cmd(cfg),
        Command::Reconstruct => reconstruct_cmd(cfg),
        Command::Report => report_cmd(cfg),
    })
}

fn simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let exp = simulate_sets(cfg)?;
    Ok(vec![save_experiment(cfg, &exp)?])
}

fn learn(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let Experiment { train, .. } = load_experiment(cfg)?;
    let mut rng = substream(cfg.seed, stream::SURROGATE);
    let res = oid_learn(
        &train,
        cfg.variant,
        &cfg.oid_bounds(),
        &cfg.learn_config(),
        &cfg.solver_config(),
        &mut rng,
    )?;
    let dir = cfg.output.dir.join("learned");
    ensure_dir(&dir)?;
    let method = method_name(&cfg.variant);
    let record = LearnedRecord {
        method: method.clone(),
        variant: cfg.variant,
        seed: cfg.seed,
        param_names: res.param_names.clone(),
        theta_vector: res.theta_vector.clone(),
        theta: res.theta,
        training_objective: res.training_objective,
        evaluations: res.evaluations,
        initial_points: res.initial_points,
    };
    let rec_path = learned_path(cfg);
    write_json(&rec_path, &record)?;

    let mut header = vec!["eval"];
    header.extend(res.param_names.iter().map(String::as_str));
    header.push("objective");
    let mut hist = Table::new(&header);
    for row in &res.history {
        let mut r = vec![row.eval.to_string()];
        r.extend(row.theta.iter().map(|v| v.to_string()));
        r.push(row.value.to_string());
        hist.push(r);
    }
    let hist_path = dir.join(format!("{method}_history.csv"));
    hist.write(&hist_path)?;
    Ok(vec![rec_path, hist_path])
}

fn validate_cmd(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let learned = load_learned(cfg)?;
    let Experiment { validation, .. } = load_experiment(cfg)?;
    let solver = cfg.solver_config();
    let rep = validate(&learned.theta, &validation, &solver)?;
    let optimal = match learned.theta.lambda {
        Some(lam) if cfg.report.per_image_optimal => Some(
            (0..validation.len())
                .map(|j| optimal_lambda_per_image(&validation, j, &learned.theta, cfg.oid_bounds().lambda, Some(lam), &solver))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        _ => None,
    };
    let dir = validation_dir(cfg);
    ensure_dir(&dir)?;
    let mut t = Table::new(&["sample", "rre", "lambda", "rre_optimal", "lambda_optimal"]);
    for j in 0..rep.rre.len() {
        let (ro, lo) = optimal
            .as_ref()
            .map(|o| (o[j].rre.to_string(), o[j].lambda.to_string()))
            .unwrap_or_default();
        t.push(vec![j.to_string(), rep.rre[j].to_string(), rep.lambdas[j].to_string(), ro, lo]);
    }
    let csv_path = dir.join(format!("{}_rre.csv", learned.method));
    t.write(&csv_path)?;
    let record = ValidationRecord {
        method: learned.method.clone(),
        mean_objective: rep.mean_objective,
        mean_rre: mean(&rep.rre),
        rre: rep.rre,
        lambdas: rep.lambdas,
        optimal,
    };
    let json_path = dir.join(format!("{}.json", learned.method));
    write_json(&json_path, &record)?;
    Ok(vec![csv_path, json_path])
}

fn reconstruct_cmd(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let learned = load_learned(cfg)?;
    let Experiment { validation, .. } = load_experiment(cfg)?;
    let xs = reconstruct(&learned.theta, &validation, &cfg.solver_config())?;
    let dir = cfg.output.dir.join("reconstructions").join(&learned.method);
    ensure_dir(&dir)?;
    let mut out = Vec::new();
    for (j, x) in xs.iter().enumerate() {
        let p = dir.join(format!("x_{j:04}.oidm"));
        write_vector(&p, x)?;
        out.push(p);
    }
    Ok(out)
}

/// Files of one kind in `dir`, sorted by name.
fn json_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    Ok(v)
}

fn report_cmd(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let learned: Vec<LearnedRecord> = json_files(&cfg.output.dir.join("learned"))?
        .iter()
        .map(|p| read_json(p))
        .collect::<Result<_, _>>()?;
    if learned.is_empty() {
        return Err(CliError::Runtime(format!(
            "no learned parameters under {}; run `oid learn` first",
            cfg.output.dir.join("learned").display()
        )));
    }
    let validations: Vec<ValidationRecord> = json_files(&validation_dir(cfg))?
        .iter()
        .map(|p| read_json(p))
        .collect::<Result<_, _>>()?;
    let exp = load_experiment(cfg)?;
    let solver = cfg.solver_config();
    let dir = cfg.output.dir.join("report");
    ensure_dir(&dir)?;

    let mut rows = Vec::new();
    let mut rre_series: Vec<(String, Vec<f64>)> = Vec::new();
    for l in &learned {
        let v = validations.iter().find(|v| v.method == l.method);
        rows.push(ParamsRow {
            method: l.method.clone(),
            params: l.theta,
            training_objective: Some(l.training_objective),
            validation_objective: v.map(|v| v.mean_objective),
            mean_rre: v.map(|v| v.mean_rre),
        });
        if let Some(v) = v {
            rre_series.push((l.method.clone(), v.rre.clone()));
            if let Some(opt) = &v.optimal {
                rre_series.push((format!("{}-per-image-lambda", l.method), opt.iter().map(|o| o.rre).collect()));
            }
        }
    }

    let vset = &exp.validation;
    let sq_norms: Vec<f64> = vset.samples.iter().map(|s| s.x_true.norm_squared()).collect();
    let objective_from_rre = |rre: &[f64]| rre.iter().zip(&sq_norms).map(|(r, n)| r * r * n).sum::<f64>() / (2.0 * rre.len() as f64);
    if cfg.report.identity_baseline {
        let opt = identity_prior_optimal(vset, cfg.oid_bounds().lambda, &solver)?;
        let rre: Vec<f64> = opt.iter().map(|o| o.rre).collect();
        rows.push(ParamsRow {
            method: "identity-optimal".into(),
            params: DesignParams {
                lambda: None,
                p: Some(2.0),
                q: Some(2.0),
                kernel: None,
            },
            training_objective: None,
            validation_objective: Some(objective_from_rre(&rre)),
            mean_rre: Some(mean(&rre)),
        });
        rre_series.push(("identity-optimal".into(), rre));
    }
    if let (Some(family), true) = (cfg.kernel_family(), cfg.report.sc_probes > 0) {
        let mut rng = substream(cfg.seed, stream::SC_PROBES);
        let fit = sc_fit(&exp.train, family, cfg.report.sc_probes, &cfg.oid_bounds(), solver.covariance, &mut rng)?;
        let params = DesignParams::kernel(None, fit.kernel);
        let rep = validate(&params, vset, &solver)?;
        rows.push(ParamsRow {
            method: "sc".into(),
            params,
            training_objective: None,
            validation_objective: Some(rep.mean_objective),
            mean_rre: Some(mean(&rep.rre)),
        });
        rre_series.push(("sc".into(), rep.rre));
    }

    let mut out = Vec::new();
    let mut emit = |name: &str, t: Table| -> Result<(), CliError> {
        let p = dir.join(name);
        t.write(&p)?;
        out.push(p);
        Ok(())
    };
    emit("params.csv", report::params_table(&rows))?;
    let series: Vec<(&str, &[f64])> = rre_series.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    emit("rre_scatter.csv", report::rre_scatter(&series))?;
    emit("rre_histogram.csv", report::rre_histogram(&series, cfg.report.histogram_bins))?;
    if let Some(s) = vset.samples.first() {
        let diag = noise_density_diagnostic(s, &vset.op_generate, &vset.op_invert)?;
        emit("error_density.csv", report::error_density(&diag, cfg.report.density_bins))?;
    }
    if cfg.report.surface_points > 0 {
        if let Some(l) = learned.iter().find(|l| l.variant == cfg.variant) {
            if let Some(t) = design_surface(cfg, l, &exp)? {
                emit("design_surface.csv", t)?;
            }
        }
    }
    Ok(out)
}

/// Training objective over the first two design coordinates with the others
/// held at their learned values.
fn design_surface(cfg: &ExperimentConfig, l: &LearnedRecord, exp: &Experiment) -> Result<Option<Table>, CliError> {
    let bounds = l.variant.bounds(&cfg.oid_bounds())?;
    if bounds.dim() < 2 {
        return Ok(None);
    }
    let n = cfg.report.surface_points;
    let axis = |k: usize| report::axis(bounds.lo[k], bounds.hi[k], n, bounds.scale[k] == Scale::Log);
    let (xs, ys) = (axis(0), axis(1));
    let solver = cfg.solver_config();
    let table = report::design_surface((&l.param_names[0], &l.param_names[1]), &xs, &ys, |x, y| {
        let mut theta = l.theta_vector.clone();
        theta[0] = x;
        theta[1] = y;
        l.variant
            .params(&theta)
            .map(|p| design_objective(&p, &exp.train, &solver))
            .unwrap_or(f64::INFINITY)
    });
    Ok(Some(table))
}
