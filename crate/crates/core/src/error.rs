use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", summarize(.0))]
    InvalidModel(Vec<Violation>),

    #[error("exogenous intervention unsupported (variable {0})")]
    ExogenousIntervention(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("factor mismatch: {0}")]
    FactorMismatch(String),

    /// The evidence of a query has probability zero, so the posterior is undefined.
    #[error("evidence has zero probability")]
    ZeroEvidence,

    #[error("record {record:?} has zero probability under the model")]
    ZeroProbabilityRecord { record: Vec<usize> },

    #[error("incomplete parameter binding: expected {expected} values, got {got}")]
    IncompleteBinding { expected: usize, got: usize },

    #[error("no valid runs")]
    NoValidRuns,

    #[error("no feasible grid point (closest L-inf fit {closest:.4})")]
    NoFeasiblePoint { closest: f64 },

    #[error("timeout")]
    Timeout,

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
