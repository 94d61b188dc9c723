use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("state error: {0}")]
    State(String),

    #[error("sampling error for attribute '{attribute}': side {side} needs {needed} rows, only {available} available (deficit {deficit})")]
    Sampling {
        attribute: String,
        side: &'static str,
        needed: usize,
        available: usize,
        deficit: usize,
    },

    #[error("undefined conditional: {0}")]
    UndefinedConditional(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("training diverged at step {step}: {message}")]
    Divergence { step: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
