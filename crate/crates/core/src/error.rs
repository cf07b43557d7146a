use std::io;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the input was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A query normalized to zero tokens and cannot be paired.
    #[error("query {0:?} is empty after normalization")]
    EmptyKey(String),
    /// A line in a TSV or config file could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
