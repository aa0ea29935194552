//! Experiment driver behind the `oid` binary: configuration parsing,
//! persisted data sets and the `simulate`, `learn`, `validate`,
//! `reconstruct` and `report` stages.

pub mod commands;
pub mod config;
pub mod data;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{run_command, Command};
pub use config::{ExperimentConfig, Problem};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<oid_core::Error> for CliError {
    fn from(e: oid_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// `key.path=value` assignments; values are TOML literals, bare words are
    /// strings.
    pub set: Vec<String>,
}

fn parse_literal(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn assign(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.trim().is_empty()) {
        return Err(CliError::Usage(format!("malformed key `{path}` in --set")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.trim().to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Validation(format!("`{path}`: `{k}` is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].trim().to_string(), value);
    Ok(())
}

/// Parse and validate a configuration document after applying `overrides`.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string().trim().to_string()))?;
    if let Some(seed) = overrides.seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::Usage(format!("seed {seed} is too large")))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    if let Some(out) = &overrides.out {
        assign(&mut table, "output.dir", toml::Value::String(out.display().to_string()))?;
    }
    for s in &overrides.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{s}`")))?;
        assign(&mut table, k.trim(), parse_literal(v.trim()))?;
    }
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Validation(e.into_inner().to_string())
        } else {
            CliError::Validation(format!("`{path}`: {}", e.into_inner()))
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_fall_back_to_strings() {
        assert_eq!(parse_literal("30"), toml::Value::Integer(30));
        assert_eq!(parse_literal("[1e-8, 10]").as_array().unwrap().len(), 2);
        assert_eq!(parse_literal("gradient"), toml::Value::String("gradient".into()));
    }

    #[test]
    fn assignment_creates_sections() {
        let mut t = toml::Table::new();
        assign(&mut t, "solver.mmgks_iters", toml::Value::Integer(7)).unwrap();
        assert_eq!(t["solver"]["mmgks_iters"].as_integer(), Some(7));
        assert!(assign(&mut t, "solver.mmgks_iters.x", toml::Value::Integer(1)).is_err());
    }
}
