use thiserror::Error;

/// Errors produced by the library. Variants map onto the CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid quadratic form ({a}, {b}, {c}): {reason}")]
    InvalidForm { a: i64, b: i64, c: i64, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("numerical consistency check failed: {0}")]
    Numerical(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    Convergence { what: String, iterations: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 input, 3 resource, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::InvalidForm { .. }
            | Error::Domain(_)
            | Error::Parse { .. }
            | Error::Io(_) => 2,
            Error::Resource(_) => 3,
            Error::Numerical(_) | Error::Convergence { .. } => 4,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
