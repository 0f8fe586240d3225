//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by the linear algebra, adapter, training, and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("rank {rank} out of range: expected 1 <= rank < {limit}")]
    RankOutOfRange { rank: usize, limit: usize },

    #[error("condition number undefined: {0}")]
    UndefinedCondition(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("step {step} out of range for schedule of {total} steps")]
    StepOutOfRange { step: usize, total: usize },

    #[error("non-finite gradient at step {step}: {detail}")]
    NonFiniteGradient { step: usize, detail: String },

    #[error("training diverged at step {step}: loss {loss} exceeds {limit}")]
    Diverged { step: usize, loss: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported task: {0}")]
    UnsupportedTask(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
