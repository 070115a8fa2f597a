//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (model shapes, strategy coefficients, experiment grids).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid input data (labels, manifests, tensor contents).
    #[error("input error: {0}")]
    Input(String),

    /// Manifest parse failure with the offending row, when known.
    #[error("parse error{}: {msg}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    Parse { row: Option<usize>, msg: String },

    /// API misuse (consumed tape, sampling from an empty buffer, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Non-finite values where finiteness is promised.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) => 1,
            Error::Input(_) | Error::Parse { .. } | Error::Io(_) | Error::Serde(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}
