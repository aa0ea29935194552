//! Tabular outputs for external plotting. Every table has a header row and a
//! fixed column order; numbers use the shortest round-trip representation so
//! repeated runs give byte-identical files.

use std::path::Path;

use serde::Serialize;

use super::{DensityDiagnostic, DesignParams, Variant};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One row of the learned-parameters table.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsRow {
    pub method: String,
    pub params: DesignParams,
    pub training_objective: Option<f64>,
    pub validation_objective: Option<f64>,
    pub mean_rre: Option<f64>,
}

pub fn params_table(rows: &[ParamsRow]) -> Table {
    let mut t = Table::new(&[
        "method",
        "lambda",
        "p",
        "q",
        "kernel",
        "beta",
        "nu",
        "length",
        "training_objective",
        "validation_objective",
        "mean_rre",
    ]);
    for r in rows {
        let (kernel, beta, nu, length) = match r.params.kernel {
            Some(KernelSpec::SquaredExponential { beta }) => ("sqexp", Some(beta), None, None),
            Some(KernelSpec::Matern { nu, length }) => ("matern", None, Some(nu), Some(length)),
            None => ("", None, None, None),
        };
        t.push(vec![
            r.method.clone(),
            opt(r.params.lambda),
            opt(r.params.p),
            opt(r.params.q),
            kernel.to_string(),
            opt(beta),
            opt(nu),
            opt(length),
            opt(r.training_objective),
            opt(r.validation_objective),
            opt(r.mean_rre),
        ]);
    }
    t
}

/// Long-format per-sample RRE values, one row per (sample, method).
pub fn rre_scatter(methods: &[(&str, &[f64])]) -> Table {
    let mut t = Table::new(&["sample", "method", "rre"]);
    let n = methods.iter().map(|m| m.1.len()).max().unwrap_or(0);
    for j in 0..n {
        for (name, vals) in methods {
            if let Some(v) = vals.get(j) {
                t.push(vec![j.to_string(), name.to_string(), num(*v)]);
            }
        }
    }
    t
}

/// Histogram counts on `bins` equal-width bins spanning all methods' values.
pub fn rre_histogram(methods: &[(&str, &[f64])], bins: usize) -> Table {
    let mut t = Table::new(&["method", "bin_lo", "bin_hi", "count"]);
    let all = methods.iter().flat_map(|m| m.1.iter().copied()).filter(|v| v.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if bins == 0 || !lo.is_finite() {
        return t;
    }
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let w = (hi - lo) / bins as f64;
    for (name, vals) in methods {
        let mut counts = vec![0usize; bins];
        for v in vals.iter().filter(|v| v.is_finite()) {
            let k = (((v - lo) / w) as usize).min(bins - 1);
            counts[k] += 1;
        }
        for (k, c) in counts.iter().enumerate() {
            t.push(vec![name.to_string(), num(lo + k as f64 * w), num(lo + (k + 1) as f64 * w), c.to_string()]);
        }
    }
    t
}

/// Objective on a tensor grid of two design coordinates.
pub fn design_surface(names: (&str, &str), xs: &[f64], ys: &[f64], f: impl Fn(f64, f64) -> f64) -> Table {
    let mut t = Table::new(&[names.0, names.1, "objective"]);
    for &y in ys {
        for &x in xs {
            t.push(vec![num(x), num(y), num(f(x, y))]);
        }
    }
    t
}

/// Grid of `n` points between `lo` and `hi`, log-spaced if `log`.
pub fn axis(lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            if log {
                10f64.powf(lo.log10() + s * (hi.log10() - lo.log10()))
            } else {
                lo + s * (hi - lo)
            }
        })
        .collect()
}

/// Empirical density of the combined data error next to the fitted
/// generalized-Gaussian and the best Gaussian (`p = 2`) densities.
pub fn error_density(diag: &DensityDiagnostic, bins: usize) -> Table {
    let mut t = Table::new(&["bin_center", "empirical", "fitted", "gaussian"]);
    let data = &diag.combined;
    if data.is_empty() || bins == 0 {
        return t;
    }
    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in data {
        counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
    }
    let sd = (data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64).sqrt();
    for (k, c) in counts.iter().enumerate() {
        let x = lo + (k as f64 + 0.5) * w;
        let gauss = if sd > 0.0 {
            (-(x * x) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        } else {
            0.0
        };
        t.push(vec![
            num(x),
            num(*c as f64 / (data.len() as f64 * w)),
            num(diag.fit.pdf(x)),
            num(gauss),
        ]);
    }
    t
}

/// Label of a learned variant for tables.
pub fn method_label(v: &Variant) -> String {
    format!("oid-{}", v.label())
}
