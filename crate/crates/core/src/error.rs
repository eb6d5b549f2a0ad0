use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates a precondition (e.g. `k > p`).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested operation is not defined for this input shape
    /// (e.g. the ideal HC statistic on an unbalanced design).
    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    /// An exact-enumeration budget would be exceeded.
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    /// A design file failed to parse.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
