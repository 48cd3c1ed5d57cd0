use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("base scenario did not recall within {max_epochs} epochs")]
    NonConvergent { max_epochs: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{scenario}: i/o error on {}: {source}", path.display())]
    Io {
        scenario: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn io(scenario: &str, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            scenario: scenario.to_string(),
            path: path.into(),
            source,
        }
    }
}
