use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum BdtError {
    /// A tree references a feature or node that does not exist.
    #[error("structural error: {0}")]
    Structural(String),

    /// Bad caller input (non-finite values, wrong feature count, ...).
    #[error("input error: {0}")]
    Input(String),

    /// An operation was invoked on an object in the wrong state.
    #[error("state error: {0}")]
    State(String),

    /// Invalid hyperparameter or prior configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The feature matrix does not match the schema the model was trained on.
    #[error("schema error: expected {expected} features, got {actual}")]
    Schema { expected: usize, actual: usize },

    /// A class has too few rows to be spread over the requested folds.
    #[error("stratification error: class {class} has {count} rows, fewer than {folds} folds")]
    Stratification { class: usize, count: usize, folds: usize },

    #[error(transparent)]
    Load(#[from] LoadError),
}

/// Failures while reading a CSV dataset.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },

    #[error("missing value at row {row}, column '{column}'")]
    MissingValue { row: usize, column: String },

    #[error("non-numeric value '{value}' at row {row}, column '{column}'")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("non-finite value at row {row}, column '{column}'")]
    NonFinite { row: usize, column: String },

    #[error("unknown label column '{0}'")]
    UnknownLabelColumn(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("empty or malformed file: {0}")]
    Malformed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = BdtError> = std::result::Result<T, E>;
