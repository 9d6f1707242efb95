//! Experiment runner for the `wmix` laboratory.
//!
//! A run reads one [`ExperimentConfig`], dispatches on its kind, and writes
//! `summary.json` plus per-curve CSV and SVG files. Identical configs give
//! identical CSV and SVG bytes; the JSON differs only in its timestamp line.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Kind};
pub use report::{Report, Written};

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

impl RunError {
    pub(crate) fn config(e: wmix::Error) -> Self {
        RunError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Precondition(_) => 3,
            RunError::Contract(_) => 4,
        }
    }
}

impl From<wmix::Error> for RunError {
    fn from(e: wmix::Error) -> Self {
        match e {
            wmix::Error::Inconsistent(_) | wmix::Error::Contract(_) | wmix::Error::NonFinite { .. } => {
                RunError::Contract(e.to_string())
            }
            other => RunError::Precondition(other.to_string()),
        }
    }
}

/// What a finished run produced.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub written: Written,
    pub out_dir: PathBuf,
}

/// Output directory: the override, else the config's, else `out/<kind>`.
pub fn output_dir(cfg: &ExperimentConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.kind.name()))
}

/// Runs one experiment and writes its artifacts. A FAIL verdict is a
/// successful run; contract violations found by the experiment are returned
/// as [`RunError::Contract`] after the artifacts are written.
pub fn run(cfg: &ExperimentConfig, override_dir: Option<&Path>, workers: usize) -> Result<Outcome, RunError> {
    cfg.validate()?;
    let report = experiments::run_kind(cfg)?;
    let out_dir = output_dir(cfg, override_dir);
    let written = report::write_report(cfg, &report, &out_dir, workers)?;
    if !report.violations.is_empty() {
        return Err(RunError::Contract(report.violations.join("; ")));
    }
    Ok(Outcome { report, written, out_dir })
}
