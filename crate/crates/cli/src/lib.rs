//! Experiment runner around `paneitz-core`: JSON configs in, JSON reports and
//! CSV path streams out.

// `!(x > 0.0)` is used on purpose: NaN must fail the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod tasks;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{ConfigError, ExperimentConfig, Task};
pub use report::{Check, PathRow, RunReport, Status};

/// Environment variable that overrides the output directory of a config.
pub const OUT_DIR_ENV: &str = "PANEITZ_OUT_DIR";

pub struct RunOutcome {
    pub report: RunReport,
    pub rows: Option<Vec<PathRow>>,
}

/// Validates and runs one config.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, ConfigError> {
    config.validate()?;
    let start = Instant::now();
    let out = tasks::dispatch(config);
    let mut report = RunReport::new(config.clone(), out.results, out.checks, out.error);
    report.timing = Some(report::Timing { wall_seconds: start.elapsed().as_secs_f64() });
    Ok(RunOutcome { report, rows: out.rows })
}

/// Independent runs in parallel; results keep the input order.
pub fn sweep(configs: &[ExperimentConfig]) -> Vec<Result<RunOutcome, ConfigError>> {
    configs.par_iter().map(run).collect()
}

/// Residual ratios between successive covariance-test runs of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub resolutions: Vec<usize>,
    pub residuals: Vec<f64>,
    pub ratios: Vec<f64>,
}

pub fn convergence_table(reports: &[&RunReport]) -> Option<ConvergenceTable> {
    let cov: Vec<&&RunReport> = reports.iter().filter(|r| r.config.task == Task::CovarianceTest).collect();
    if cov.len() < 2 {
        return None;
    }
    let resolutions: Vec<usize> = cov.iter().map(|r| r.config.resolution).collect();
    let residuals: Vec<f64> = cov.iter().map(|r| r.results["residual"].as_f64().unwrap_or(f64::NAN)).collect();
    let ratios = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    Some(ConvergenceTable { resolutions, residuals, ratios })
}

/// Writes the report (and the CSV stream, if any) into `dir`; returns the paths.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let outputs = &outcome.report.config.outputs;
    let report_path = dir.join(&outputs.report);
    std::fs::write(&report_path, outcome.report.to_json())?;
    let mut written = vec![report_path];
    if let Some(rows) = &outcome.rows {
        let csv_path = dir.join(&outputs.csv);
        let file = std::fs::File::create(&csv_path)?;
        report::write_csv(file, rows).map_err(std::io::Error::other)?;
        written.push(csv_path);
    }
    Ok(written)
}

/// Flag, then environment, then the config's own directory, then `.`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(d) = flag {
        return d.into();
    }
    if let Some(d) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return d.into();
    }
    config.outputs.dir.clone().unwrap_or_else(|| PathBuf::from("."))
}
