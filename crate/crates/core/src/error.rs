//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A row of an input file failed validation. `row` is the 1-based data
    /// row index (the header does not count).
    #[error("{message}, row {row}")]
    MalformedRow { row: usize, message: String },

    #[error("missing column '{0}' in header")]
    MissingColumn(String),

    #[error("input contains no records: {0}")]
    EmptyInput(String),

    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("database has duplicate (model, task) pairs; aggregate it first")]
    NotAggregated,

    #[error("cannot denormalize on zero-spread task '{0}'")]
    DegenerateTask(String),

    #[error("unknown {kind} label '{label}'")]
    UnknownLabel { kind: &'static str, label: String },

    #[error("duplicate {kind} label '{label}'")]
    DuplicateLabel { kind: &'static str, label: String },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("point outside geometry domain: {0}")]
    DomainViolation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("delta matrix has no observed entries")]
    EmptyDelta,

    #[error("non-finite loss at iteration {iteration} on pair ({a}, {b})")]
    NonFiniteLoss { iteration: usize, a: String, b: String },

    #[error("cannot place entity with no observations")]
    EmptyPlacement,

    #[error("corpus too small: need more than {needed} observed entries, have {available}")]
    CorpusTooSmall { needed: usize, available: usize },

    #[error("too few points: need at least {needed}, have {actual}")]
    TooFewPoints { needed: usize, actual: usize },
}
