//! Run reports and the per-state CSV stream.

use paneitz_core::continuation::ContinuationState;
use paneitz_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

pub const TOOL: &str = "paneitz";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `measured <= tolerance`
    AtMost,
    /// `measured > tolerance`
    Above,
}

/// One tolerance check, named after the invariant it instantiates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub invariant: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, invariant: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            invariant: invariant.into(),
            measured,
            comparison: Comparison::AtMost,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    pub fn above(name: &str, invariant: &str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            invariant: invariant.into(),
            measured,
            comparison: Comparison::Above,
            tolerance: bound,
            passed: measured > bound,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    ChecksFailed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorPayload {
    pub kind: &'static str,
    pub message: String,
    pub detail: Value,
}

impl From<&Error> for ErrorPayload {
    fn from(e: &Error) -> Self {
        let (kind, detail) = match e {
            Error::InvalidInput(m) => ("invalid_input", json!({ "reason": m })),
            Error::NonPositiveFactor { index, value } => {
                ("non_positive_factor", json!({ "index": index, "value": value }))
            }
            Error::DimensionObstruction { n, detail } => ("dimension_obstruction", json!({ "n": n, "reason": detail })),
            Error::NotSymmetric => ("not_symmetric", Value::Null),
            Error::Singular => ("singular", Value::Null),
            Error::NonConvergence { iterations, residual } => {
                ("non_convergence", json!({ "iterations": iterations, "residual": residual }))
            }
            Error::PositivityLost { u_min, margin_min } => {
                ("positivity_lost", json!({ "u_min": u_min, "margin_min": margin_min }))
            }
            Error::Precondition { what, value } => ("precondition", json!({ "what": what, "value": value })),
            Error::Infeasible(m) => ("infeasible", json!({ "reason": m })),
            Error::PathStuck { lambda, step } => ("path_stuck", json!({ "lambda": lambda, "step": step })),
        };
        Self { kind, message: e.to_string(), detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub status: Status,
    pub results: Value,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorPayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl RunReport {
    pub fn new(config: ExperimentConfig, results: Value, checks: Vec<Check>, error: Option<ErrorPayload>) -> Self {
        let status = if error.is_some() {
            Status::Failed
        } else if checks.iter().all(|c| c.passed) {
            Status::Passed
        } else {
            Status::ChecksFailed
        };
        Self { tool: TOOL, version: VERSION, config, status, results, checks, error, timing: None }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Passed
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// The report without timing: identical for identical configs.
    pub fn payload_json(&self) -> String {
        let mut copy = self.clone();
        copy.timing = None;
        copy.to_json()
    }
}

/// One CSV row per accepted continuation state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRow {
    pub lambda: f64,
    pub residual_norm: f64,
    pub u_min: f64,
    pub u_critical_norm: f64,
    #[serde(rename = "minJ_margin")]
    pub min_j_margin: f64,
    #[serde(rename = "minQ")]
    pub min_q: f64,
    pub v_sup: f64,
    pub h_min_eig: f64,
    pub identity_34_residual: f64,
    pub identity_37_residual: f64,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "lambda",
    "residual_norm",
    "u_min",
    "u_critical_norm",
    "minJ_margin",
    "minQ",
    "v_sup",
    "h_min_eig",
    "identity_34_residual",
    "identity_37_residual",
];

impl From<&ContinuationState> for PathRow {
    fn from(s: &ContinuationState) -> Self {
        let d = &s.diagnostics;
        Self {
            lambda: s.lambda,
            residual_norm: s.residual_norm,
            u_min: d.u_min,
            u_critical_norm: d.u_critical_norm,
            min_j_margin: d.min_j_margin,
            min_q: d.min_q,
            v_sup: d.v_sup,
            h_min_eig: d.h_min_eig,
            identity_34_residual: d.identity_34_residual,
            identity_37_residual: d.identity_37_residual,
        }
    }
}

pub fn write_csv<W: std::io::Write>(out: W, rows: &[PathRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
