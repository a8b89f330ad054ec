use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Malformed or out-of-window input; the message names the bound.
    InvalidInput(String),
    /// A conformal factor had a non-positive or non-finite entry.
    NonPositiveFactor {
        index: usize,
        value: f64,
    },
    /// The fourth-order linearization is not known to be positive for this n.
    DimensionObstruction {
        n: usize,
        detail: String,
    },
    /// An operation needing a weighted-symmetric operator received another one.
    NotSymmetric,
    Singular,
    NonConvergence {
        iterations: usize,
        residual: f64,
    },
    PositivityLost {
        u_min: f64,
        margin_min: f64,
    },
    /// A precondition on curvature failed; carries the offending minimum.
    Precondition {
        what: String,
        value: f64,
    },
    Infeasible(String),
    /// Step floor reached; `lambda` is the last accepted parameter.
    PathStuck {
        lambda: f64,
        step: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::NonPositiveFactor { index, value } => {
                write!(f, "conformal factor must be positive, found {value} at node {index}")
            }
            Error::DimensionObstruction { n, detail } => write!(f, "dimension n = {n} refused: {detail}"),
            Error::NotSymmetric => write!(f, "operator is not weighted-symmetric"),
            Error::Singular => write!(f, "linear system is singular to working precision"),
            Error::NonConvergence { iterations, residual } => {
                write!(f, "no convergence after {iterations} iterations (residual {residual:.3e})")
            }
            Error::PositivityLost { u_min, margin_min } => {
                write!(f, "positivity lost: min u = {u_min:.3e}, min scalar-curvature margin = {margin_min:.3e}")
            }
            Error::Precondition { what, value } => write!(f, "precondition failed: {what} (minimum {value:.6e})"),
            Error::Infeasible(m) => write!(f, "infeasible: {m}"),
            Error::PathStuck { lambda, step } => {
                write!(f, "continuation stuck at lambda = {lambda:.6e} (step {step:.1e} below floor)")
            }
        }
    }
}

impl core::error::Error for Error {}
