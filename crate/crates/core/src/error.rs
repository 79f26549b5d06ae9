use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the factorization library.
#[derive(Debug, Error)]
pub enum NbmfError {
    #[error("dimension mismatch in {context}: {details}")]
    Dimension { context: &'static str, details: String },

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("start point is infeasible: {0}")]
    Infeasible(String),

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("problem size {size} exceeds the hard cap of {cap} variables")]
    Capacity { size: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("ingestion error for {path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("value {value} lies outside [0, 1]")]
    Range { value: f64 },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl NbmfError {
    pub(crate) fn dims(context: &'static str, details: impl Into<String>) -> Self {
        NbmfError::Dimension {
            context,
            details: details.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, NbmfError>;
