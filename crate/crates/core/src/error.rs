//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by configuration, signal processing, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter combination violates a documented invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input vector or tensor does not have the required shape.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A serialized file is malformed, truncated, or inconsistent.
    #[error("format error: {0}")]
    Format(String),

    /// An operation was called in a way its contract forbids.
    #[error("usage error: {0}")]
    Usage(String),

    /// Training diverged (NaN/inf loss).
    #[error("training diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
