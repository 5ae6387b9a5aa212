use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentKind;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "plot.csv";

/// Artifact version stamped into every row.
pub fn artifact_version() -> String {
    format!("gaussloc-{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Rows of one experiment in replica order.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// CSV with `config_hash` and `version` leading every row.
    pub fn write_csv(&self, path: &Path, config_hash: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["config_hash", "version"];
        header.extend(&self.columns);
        w.write_record(&header)?;
        let version = artifact_version();
        for row in &self.rows {
            let mut rec = vec![config_hash.to_owned(), version.clone()];
            rec.extend(row.iter().map(Cell::render));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A named inequality checked by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Check {
    /// Record `lhs <= rhs`.
    pub fn at_most(name: impl Into<String>, inequality: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            inequality: inequality.into(),
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    }

    /// Record a boolean condition with its two compared numbers.
    pub fn flag(name: impl Into<String>, inequality: impl Into<String>, lhs: f64, rhs: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            inequality: inequality.into(),
            lhs,
            rhs,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub version: String,
    pub timestamp_unix: u64,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub all_pass: bool,
    pub results: serde_json::Value,
}

impl Summary {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Columns projected into the long-format plot file.
pub fn plot_columns(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::IdentityCheck => &["beta", "replica", "free_energy_derivative", "mean_overlap"],
        ExperimentKind::Moments => &["beta", "replica", "z_ratio", "inverse_ratio"],
        ExperimentKind::LocalizationScan => &["beta", "delta", "replica", "a_delta_mass"],
        ExperimentKind::BallCover => &["beta", "delta", "replica", "covered_fraction"],
        ExperimentKind::OuVariance => &["beta", "horizon", "variance_lhs", "variance_rhs"],
        ExperimentKind::TemperatureEquivalence => &["beta", "k", "ks_p_free_energy"],
        ExperimentKind::AtomDecay => &["n", "replica", "max_atom", "n_times_atom"],
        ExperimentKind::TurnCensus => &["n", "d", "turns", "count"],
    }
}

/// Write `plot.csv` in `dir` from its `results.csv` and `summary.json`.
/// Nothing is written unless both inputs are present and well formed.
pub fn emit_summary(dir: &Path) -> Result<std::path::PathBuf> {
    let results = dir.join(RESULTS_FILE);
    let summary = dir.join(SUMMARY_FILE);
    if !results.is_file() || !summary.is_file() {
        return Err(Error::Precondition(format!(
            "{} has no {RESULTS_FILE} and {SUMMARY_FILE} to summarize",
            dir.display()
        )));
    }
    let kind = Summary::read(&summary)?.experiment;
    let mut r = csv::Reader::from_path(&results)?;
    let headers = r.headers()?.clone();
    let wanted = plot_columns(kind);
    let idx: Vec<usize> = wanted
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| Error::Serialization(format!("{RESULTS_FILE} lacks column '{c}'")))
        })
        .collect::<Result<_>>()?;
    let records: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::Precondition(format!("{} contains no rows", results.display())));
    }
    let out = dir.join(PLOT_FILE);
    let mut w = csv::Writer::from_path(&out)?;
    w.write_record(wanted)?;
    for rec in &records {
        w.write_record(idx.iter().map(|&i| &rec[i]))?;
    }
    w.flush()?;
    Ok(out)
}
