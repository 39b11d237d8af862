use thiserror::Error;

use crate::model::ValidationReport;

/// Errors raised by model construction, solvers and verifiers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range 1..={max}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid model:\n{0}")]
    InvalidModel(ValidationReport),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("observation {y} under action {u} has likelihood {likelihood:e}")]
    ZeroLikelihood { y: usize, u: usize, likelihood: f64 },

    #[error("observation sequence of length {len} exceeds the oracle limit {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("grid with {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: u128, cap: usize },

    #[error("operation requires linear costs, model has nonlinear family `{0}`")]
    NonlinearCostUnsupported(String),

    #[error("value iteration did not converge: change {change:e} after {iterations} iterations")]
    NonConvergence { iterations: usize, change: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("eigenvalue {0:e} is negative")]
    NegativeEigenvalue(f64),

    #[error("postcondition failed: {0}")]
    PostconditionFailed(String),

    #[error("policy structure violation: {0}")]
    StructureViolation(String),

    #[error("policy never stops and discount is 1; horizon is unbounded")]
    HorizonUnbounded,

    #[error("model file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
