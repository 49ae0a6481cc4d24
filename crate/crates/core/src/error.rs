use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Variants are grouped by how a caller is expected to react: bad
/// configuration, bad input data, a numerical breakdown, or an iterative
/// routine that ran out of iterations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{what} did not converge after {iterations} iterations (last change {gap:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        gap: f64,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn not_pd(msg: impl Into<String>) -> Self {
        Error::NotPositiveDefinite(msg.into())
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Io(_) | Error::Serde(_) => ErrorKind::Input,
            Error::NotPositiveDefinite(_) | Error::Numerical(_) => ErrorKind::Numerical,
            Error::NonConvergence { .. } => ErrorKind::NonConvergence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
    NonConvergence,
}

pub type Result<T> = std::result::Result<T, Error>;
