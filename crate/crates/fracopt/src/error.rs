use thiserror::Error;

/// Error type shared across the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Array/grid/mesh shapes do not line up.
    #[error("shape error: {0}")]
    Shape(String),
    /// A validated invariant of a configuration or type failed.
    #[error("invariant violation: {0}")]
    Invariant(String),
    /// A solver produced a non-finite value or failed to make progress.
    #[error("solver failure: {0}")]
    Solver(String),
    /// Configuration file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),
    /// File I/O while reading inputs or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
