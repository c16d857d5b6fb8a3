use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("k = {k} is too large for {n} samples (need 1 <= k <= n - 1)")]
    KTooLarge { k: usize, n: usize },

    #[error("index {index} out of range for {n} samples")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("mixture component {component} is degenerate ({effective_count:.3} effective samples)")]
    DegenerateComponent { component: usize, effective_count: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("density for sample {0} is not a positive finite number")]
    NonPositiveDensity(usize),

    #[error("all neighbor weights of sample {0} vanished")]
    ZeroWeightNeighborhood(usize),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("contamination rate {rate} selects no samples out of {n} (or lies outside (0, 1))")]
    RateOutOfRange { rate: f64, n: usize },

    #[error("parse error at line {line}, column {column}")]
    ParseError { line: usize, column: usize },

    #[error("inconsistent row width at line {line}")]
    InconsistentWidth { line: usize },

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("report serialization: {0}")]
    Report(#[from] serde_json::Error),
}
