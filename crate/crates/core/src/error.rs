use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The variants group into the exit classes used by the command line:
/// contract/config/ingestion problems are caller mistakes, faults are
/// numerical failures at run time, and oracle failures come from the
/// verification suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("ingestion error at row {row}: {msg}")]
    Ingestion { row: usize, msg: String },

    #[error("non-finite value in Euler step at grid node {node}")]
    StepFault { node: usize },

    #[error("non-finite latent state at grid node {node}")]
    PathFault { node: usize },

    #[error("training fault: {0}")]
    Training(String),

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("finite-difference oracle: non-finite evaluation at coordinate {0}")]
    Oracle(usize),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for numerical faults that happen while running (divergence,
    /// non-finite states) as opposed to invalid input.
    pub fn is_runtime_fault(&self) -> bool {
        matches!(
            self,
            Error::StepFault { .. }
                | Error::PathFault { .. }
                | Error::Training(_)
                | Error::NonFiniteGradient(_)
                | Error::Oracle(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
