use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The constraint set of a projection problem is empty.
    #[error("infeasible problem: {0}")]
    Infeasible(String),

    /// A label, label set, or loss/label-kind combination is invalid.
    #[error("invalid label: {0}")]
    Label(String),

    /// Mismatched matrix or vector dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation that is not defined for the given loss or mode.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An iterative solve failed to reach its residual target, or the
    /// objective became non-finite.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Malformed input text or binary data.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Malformed binary payload or header.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
