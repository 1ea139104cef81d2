use thiserror::Error;

/// Errors raised by model construction, solvers and file parsers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at state {state}")]
    NonFinite { state: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("mesh of {count} points exceeds the cap of {cap}")]
    MeshTooLarge { count: u128, cap: u128 },

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
