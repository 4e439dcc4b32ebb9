//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by dataset construction, fitting, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("conditioning set is empty for the requested estimand")]
    EmptyConditioningSet,

    #[error("empty data: {0}")]
    EmptyData(&'static str),

    #[error("normal equations are numerically singular (unpenalized fit on collinear features)")]
    SingularSystem,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("player {0} has no observations in a training split")]
    DegeneratePlayer(usize),

    #[error("player {player} has too few observations ({count}) to appear in every training set")]
    InsufficientPlayerData { player: usize, count: usize },

    #[error("targeting fluctuation diverged: |epsilon| = {epsilon} exceeds 10")]
    FluctuationDiverged { epsilon: f64 },

    #[error("influence function is degenerate (zero variance)")]
    DegenerateEif,

    #[error("standard error is zero or non-positive")]
    DegenerateSe,

    #[error("operation requires a discrete data-generating process with finite support")]
    NonDiscreteDgp,

    #[error("invalid data-generating process: {0}")]
    InvalidDgp(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing column '{0}' in input file")]
    MissingColumn(String),

    #[error("outcome must be 0 or 1 (row {row}, value '{value}')")]
    NonBinaryOutcome { row: usize, value: String },

    #[error("unparseable value at row {row}, column '{column}': '{value}'")]
    UnparseableValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
