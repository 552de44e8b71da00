use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed numeric input (non-finite values, wrong sizes, empty sets).
    #[error("invalid input: {0}")]
    Input(String),

    /// A linear-algebra step could not be carried out (singular innovation covariance).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Scenario or run configuration is inconsistent or references unknown entities.
    #[error("configuration error: {0}")]
    Config(String),

    /// The message bus delivered something the algorithm cannot use. Indicates a harness bug.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
