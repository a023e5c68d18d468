use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: column `{column}` not found in header")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}` as a number")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: row {row}, column `{column}`: response must be non-negative, found {value}")]
    NegativeResponse {
        path: PathBuf,
        row: usize,
        column: String,
        value: f64,
    },

    #[error("{path}: no data rows")]
    EmptyFile { path: PathBuf },

    #[error("{path}: row {row}: {message}")]
    MalformedRow { path: PathBuf, row: usize, message: String },

    #[error("cannot standardize column `{column}`: standard deviation is zero")]
    ZeroVariance { column: String },

    #[error("matrix `{0}` is not symmetric positive definite")]
    NotPositiveDefinite(String),

    #[error("non-finite value in block `{block}` at iteration {iteration}")]
    NonFinite { iteration: usize, block: &'static str },

    #[error("{0}")]
    EmptyGroup(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status for this error: 3 for numerical failure inside
    /// a chain, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } => 3,
            _ => 2,
        }
    }
}
