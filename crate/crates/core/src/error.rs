use std::path::PathBuf;

use thiserror::Error;

use crate::CaseId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent caller input.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Cholesky factorization hit a non-positive pivot even after the jitter ladder.
    #[error("matrix not positive definite at pivot {pivot} (jitter {jitter:e})")]
    NotPositiveDefinite { pivot: usize, jitter: f64 },

    #[error("hyperparameter search failed: every restart was rejected")]
    HyperSearch,

    #[error("case {0} not found")]
    UnknownCase(CaseId),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid learner state: {0}")]
    State(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for errors caused by bad user-supplied data rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Input(_)
                | Error::Dimension { .. }
                | Error::UnknownCase(_)
                | Error::Parse { .. }
                | Error::Io { .. }
        )
    }
}
