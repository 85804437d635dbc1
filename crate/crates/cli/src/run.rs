//! Running a configuration, writing its artifacts, and re-running a
//! recorded result.

use crate::config::{parse_config, ConfigError, ExperimentConfig, Params, Subcommand};
use crate::experiments::{self, Check, Outcome};
use serde::{Deserialize, Serialize};
use smallcap_core::numeric::Z99;
use smallcap_core::records::Table;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_DAT: &str = "results.dat";

/// Everything needed to rerun an experiment, plus what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub version: String,
    pub subcommand: Subcommand,
    pub seed: u64,
    /// The resolved configuration document.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub table: Table,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(smallcap_core::Error),
    Schema(String),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Compute(e) => write!(f, "computation failed: {e}"),
            RunError::Schema(m) => write!(f, "record does not match: {m}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<smallcap_core::Error> for RunError {
    fn from(e: smallcap_core::Error) -> Self {
        RunError::Compute(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Run the experiment on a pool of `workers` threads (`None`: rayon's
/// default). Results do not depend on the pool size.
pub fn execute(config: &ExperimentConfig, workers: Option<usize>) -> Result<Outcome, RunError> {
    let work = || match &config.params {
        Params::Moments(p) => experiments::moments::run(p, config.seed),
        Params::Decouple(p) => experiments::decouple::run(p, config.seed),
        Params::Kakeya(p) => experiments::kakeya::run(p, config.seed),
        Params::Energy(p) => experiments::energy::run(p, config.seed),
        Params::Vdc(p) => experiments::vdc::run(p, config.seed),
        Params::OracleCheck(p) => experiments::oracle::run(p, config.seed),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        builder = builder.num_threads(k.max(1));
    }
    let pool = builder.build().map_err(|e| RunError::Schema(format!("thread pool: {e}")))?;
    Ok(pool.install(work)?)
}

pub fn record(config: &ExperimentConfig, outcome: Outcome) -> RunRecord {
    RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: config.subcommand,
        seed: config.seed,
        config: serde_json::to_value(config).expect("config serializes"),
        passed: outcome.passed(),
        seeds: outcome.seeds,
        table: outcome.table,
        summary: outcome.summary,
        checks: outcome.checks,
    }
}

/// Output directory: explicit flag, then the config's `output`, then
/// `runs/<subcommand>`.
pub fn output_dir(config: &ExperimentConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(config.subcommand.name()))
}

/// Execute, write `results.json` and `results.dat` into `dir`, and return
/// the record.
pub fn run(config: &ExperimentConfig, dir: &Path, workers: Option<usize>) -> Result<RunRecord, RunError> {
    let outcome = execute(config, workers)?;
    let rec = record(config, outcome);
    std::fs::create_dir_all(dir)?;
    smallcap_core::records::write_json(&dir.join(RESULTS_JSON), &rec)?;
    rec.table.write_dat(&dir.join(RESULTS_DAT))?;
    Ok(rec)
}

pub fn read_record(path: &Path) -> Result<RunRecord, RunError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))
}

/// The recorded configuration, parsed and validated again.
pub fn recorded_config(rec: &RunRecord) -> Result<ExperimentConfig, RunError> {
    let text = serde_json::to_string_pretty(&rec.config).map_err(smallcap_core::Error::from)?;
    Ok(parse_config(&text, Some(rec.subcommand))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    /// Largest `|a - b| / max(|a|, |b|)` over table cells and summary values.
    pub max_relative: f64,
    /// Largest `|a - b| / sigma` over columns that carry an `<name>_error`
    /// companion (99% half-widths, converted to standard errors).
    pub max_sigmas: Option<f64>,
    pub cells: usize,
}

impl Deviation {
    pub fn identical(&self) -> bool {
        self.max_relative == 0.0
    }
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b || (a.is_nan() && b.is_nan()) {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Compare a fresh table and summary against a recorded one.
pub fn compare(recorded: &RunRecord, fresh: &Outcome) -> Result<Deviation, RunError> {
    let (a, b) = (&recorded.table, &fresh.table);
    if a.columns != b.columns {
        return Err(RunError::Schema(format!("columns {:?} vs {:?}", a.columns, b.columns)));
    }
    if a.rows.len() != b.rows.len() {
        return Err(RunError::Schema(format!("{} recorded rows vs {} recomputed", a.rows.len(), b.rows.len())));
    }
    let error_col: Vec<Option<usize>> = a
        .columns
        .iter()
        .map(|c| a.columns.iter().position(|e| *e == format!("{c}_error")))
        .collect();
    let mut max_relative: f64 = 0.0;
    let mut max_sigmas: Option<f64> = None;
    let mut cells = 0;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if ra.len() != rb.len() {
            return Err(RunError::Schema("row lengths differ".into()));
        }
        for (j, (&x, &y)) in ra.iter().zip(rb).enumerate() {
            cells += 1;
            max_relative = max_relative.max(relative(x, y));
            if let Some(e) = error_col[j] {
                let sigma = (ra[e].powi(2) + rb[e].powi(2)).sqrt() / Z99;
                let s = if x == y { 0.0 } else { (x - y).abs() / sigma.max(f64::MIN_POSITIVE) };
                max_sigmas = Some(max_sigmas.unwrap_or(0.0).max(s));
            }
        }
    }
    for (k, &x) in &recorded.summary {
        let y = *fresh.summary.get(k).ok_or_else(|| RunError::Schema(format!("summary key `{k}` missing")))?;
        cells += 1;
        max_relative = max_relative.max(relative(x, y));
    }
    Ok(Deviation { max_relative, max_sigmas, cells })
}

/// Rerun a recorded experiment (optionally under another seed) and diff it
/// against the record.
pub fn reproduce(path: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<(RunRecord, Deviation), RunError> {
    let rec = read_record(path)?;
    let mut config = recorded_config(&rec)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let fresh = execute(&config, workers)?;
    let dev = compare(&rec, &fresh)?;
    Ok((rec, dev))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_deviation() {
        assert_eq!(relative(1.0, 1.0), 0.0);
        assert_eq!(relative(0.0, 0.0), 0.0);
        assert!((relative(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_a_schema_error() {
        let config = ExperimentConfig::default_for(Subcommand::Vdc);
        let mut out = Outcome::new(Table::new(["a"]));
        out.table.push(vec![1.0]);
        let rec = record(&config, out.clone());
        out.table.push(vec![2.0]);
        assert!(matches!(compare(&rec, &out), Err(RunError::Schema(_))));
    }
}
