use std::path::Path;
use std::process::Command as Process;

use oid_cli::{parse_config, run_command, CliError, Command, Overrides};
use oid_core::oid::Variant;

const TINY: &str = r#"
problem = "deblur"
seed = 3
[geometry]
nx = 12
ny = 12
[operator]
generate_sigma = [1.0, 1.0]
invert_sigma = [1.0, 1.4]
[training]
train_prototypes = 2
train_transforms = 2
validation_prototypes = 1
validation_transforms = 2
[variant]
kind = "lambda-only"
p = 2.0
q = 2.0
[surrogate]
max_evals = 8
"#;

fn tiny(dir: &Path) -> oid_cli::ExperimentConfig {
    let overrides = Overrides {
        out: Some(dir.to_path_buf()),
        ..Default::default()
    };
    parse_config(TINY, &overrides).unwrap()
}

fn message(e: CliError) -> String {
    e.to_string()
}

#[test]
fn bounds_and_defaults_parse() {
    let text = "problem = \"deblur\"\nseed = 1\n[bounds]\nlambda_bounds = [1e-8, 10]\n";
    let cfg = parse_config(text, &Overrides::default()).unwrap();
    assert_eq!(cfg.oid_bounds().lambda, (1e-8, 10.0));
    assert_eq!(cfg.solver.mmgks_iters, 50);
    assert_eq!(cfg.variant, Variant::LambdaPq);
}

#[test]
fn reversed_bounds_name_the_key() {
    let text = "problem = \"deblur\"\nseed = 1\n[bounds]\nlambda_bounds = [10, 1]\n";
    let err = parse_config(text, &Overrides::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(message(err).contains("bounds.lambda_bounds"));
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let text = "problem = \"deblur\"\nseed = 1\n[solver]\nmmgks_iter = 5\n";
    let err = message(parse_config(text, &Overrides::default()).unwrap_err());
    assert!(err.contains("solver") && err.contains("mmgks_iter"), "{err}");
}

#[test]
fn missing_seed_is_a_validation_error() {
    let err = parse_config("problem = \"deblur\"\n", &Overrides::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(message(err).contains("seed"));
}

#[test]
fn overrides_take_precedence() {
    let overrides = Overrides {
        seed: Some(99),
        out: Some("elsewhere".into()),
        set: vec!["solver.mmgks_iters=12".into(), "solver.regularizer=gradient".into()],
    };
    let cfg = parse_config(TINY, &overrides).unwrap();
    assert_eq!(cfg.seed, 99);
    assert_eq!(cfg.output.dir, Path::new("elsewhere"));
    assert_eq!(cfg.solver.mmgks_iters, 12);

    let bad = Overrides {
        set: vec!["no-equals-sign".into()],
        ..Default::default()
    };
    assert_eq!(parse_config(TINY, &bad).unwrap_err().exit_code(), 1);
}

#[test]
fn validate_before_learn_explains_what_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    run_command(Command::Simulate, &cfg).unwrap();
    let err = run_command(Command::Validate, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(message(err).contains("oid learn"));
}

#[test]
fn learn_before_simulate_explains_what_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let err = message(run_command(Command::Learn, &tiny(dir.path())).unwrap_err());
    assert!(err.contains("oid simulate"), "{err}");
}

#[test]
fn repeated_learning_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    run_command(Command::Simulate, &cfg).unwrap();
    let read = |paths: Vec<std::path::PathBuf>| -> Vec<Vec<u8>> { paths.iter().map(|p| std::fs::read(p).unwrap()).collect() };
    let first = read(run_command(Command::Learn, &cfg).unwrap());
    let second = read(run_command(Command::Learn, &cfg).unwrap());
    assert!(!first.is_empty());
    assert_eq!(first, second);
}

#[test]
fn reconstruct_writes_one_file_per_validation_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    for cmd in [Command::Simulate, Command::Learn] {
        run_command(cmd, &cfg).unwrap();
    }
    let files = run_command(Command::Reconstruct, &cfg).unwrap();
    let images: Vec<_> = files.iter().filter(|p| p.extension().is_some_and(|e| e == "oidm")).collect();
    assert_eq!(images.len(), 2);
    let x = oid_core::matrix_file::read_vector(images[0]).unwrap();
    assert_eq!(x.len(), 144);
}

fn oid() -> Process {
    Process::new(env!("CARGO_BIN_EXE_oid"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(&config, TINY).unwrap();
    let out = dir.path().join("out");

    let usage = oid().arg("simulate").output().unwrap().status;
    assert_eq!(usage.code(), Some(1));
    let unknown = oid().args(["frobnicate", "--config"]).arg(&config).output().unwrap().status;
    assert_eq!(unknown.code(), Some(1));

    let invalid = oid()
        .args(["simulate", "--set", "bounds.pq_bounds=[3, 1]", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(invalid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("bounds.pq_bounds"));

    let runtime = oid().args(["learn", "--config"]).arg(&config).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(runtime.code(), Some(3));

    let ok = oid()
        .args(["simulate", "--seed", "4", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(out.join("data/manifest.json").exists());
}
