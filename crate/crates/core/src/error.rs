//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/parameter shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An input violated a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A computation produced NaN/Inf where a finite value is required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A dataset file is malformed. `offset` is the byte position of the
    /// first inconsistency.
    #[error("dataset format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Bad experiment configuration; `key` names the offending entry when known.
    #[error("configuration error{}: {message}", key.as_ref().map(|k| format!(" ({k})")).unwrap_or_default())]
    Config { key: Option<String>, message: String },

    /// A text input (CSV, config file) failed to parse. 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn config(key: Option<&str>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.map(str::to_owned),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 for configuration problems,
    /// 2 for anything that failed at runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
