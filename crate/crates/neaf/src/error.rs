//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// Invalid configuration: bad field values or parameter-count mismatch.
    #[error("configuration error: {0}")]
    Config(String),

    /// Dataset problems: missing files, inconsistent image/label counts.
    #[error("data error: {0}")]
    Data(String),

    /// Malformed IDX container (bad magic or header).
    #[error("IDX format error: {0}")]
    Format(String),

    /// IDX payload does not match the dimensions declared in its header.
    #[error("IDX length error: {0}")]
    Length(String),

    /// Downloaded file does not match its pinned checksum.
    #[error("integrity error for {file}: expected sha256 {expected}, got {actual}")]
    Integrity {
        file: String,
        expected: String,
        actual: String,
    },

    /// Network-level download failure; safe to retry.
    #[error("fetch error: {0}")]
    Fetch(String),

    /// A training step produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
