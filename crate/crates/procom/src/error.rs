//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants onto exit codes: [`Error::Usage`] is 1,
/// [`Error::Io`] / [`Error::Data`] / [`Error::Shape`] are 2,
/// [`Error::Numeric`] is 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or inconsistent input data (files, ids, empty sets).
    #[error("data error: {0}")]
    Data(String),

    /// Incompatible tensor shapes; reports the operation and the shapes involved.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// Invalid arguments or configuration.
    #[error("usage error: {0}")]
    Usage(String),

    /// Non-finite values where finite ones are required (diverged loss etc.).
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
