use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("algebra error: {0}")]
    Algebra(String),
    #[error("inconsistent moment system: {0}")]
    Model(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
