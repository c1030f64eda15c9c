use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot write {path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, #[source] std::io::Error),

    #[error("aborted: {0}")]
    Abort(String),

    #[error(transparent)]
    Core(brownian_marble::Error),
}

impl From<brownian_marble::Error> for CliError {
    fn from(e: brownian_marble::Error) -> Self {
        match e {
            brownian_marble::Error::InvalidArgument(msg) => Self::Usage(msg),
            other => Self::Core(other),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Abort(format!("csv: {e}"))
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Io(..) | Self::Abort(_) | Self::Core(_) => 3,
        }
    }
}
