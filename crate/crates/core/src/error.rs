use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("inadmissible frequency sequence: {0}")]
    Inadmissible(String),

    #[error("infeasible grid: {points} points exceed the budget of {budget}")]
    InfeasibleGrid { points: u128, budget: u64 },

    #[error("infeasible at requested scale during {stage}: {reason}")]
    Infeasible { stage: String, reason: String },

    #[error("missing estimate: {0}")]
    MissingEstimate(String),

    #[error("table error: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;
