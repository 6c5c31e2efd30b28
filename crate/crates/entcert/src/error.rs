//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped into configuration errors (bad parameters, caught
/// before any work starts) and data errors (problems with shot files or
/// numerical breakdown at run time). The CLI maps the former to exit code 2
/// and the latter to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameters.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed or inconsistent input data (shot files, metadata).
    #[error("data error: {0}")]
    Data(String),
    /// Numerical failure (singular overlap matrix, non-convergence, ...).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// JSON (de)serialization failure while reading or writing artifacts.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Convenience constructor for configuration errors.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Convenience constructor for data errors.
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Exit code the CLI should use for this error (2 = config, 3 = data).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
