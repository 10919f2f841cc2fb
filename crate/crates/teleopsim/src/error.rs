use std::path::PathBuf;

use teleop_core::{ConfigError, SimError};

/// Process exit code for a run that completed without problems.
pub const EXIT_OK: u8 = 0;
/// Exit code for bad flags, config files or input files.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code for a run that finished but broke an invariant.
pub const EXIT_INVARIANT: u8 = 3;
/// Exit code for IO and runtime failures.
pub const EXIT_RUNTIME: u8 = 1;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Config(#[from] ConfigError),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// An input file could not be read.
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An output file could not be written.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Sim(SimError),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("service: {0}")]
    Service(String),
}

impl From<SimError> for Error {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Error::Config(c),
            other => Error::Sim(other),
        }
    }
}

impl Error {
    pub fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::Config(ConfigError::new(field, message))
    }

    pub fn read(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Read {
            path: path.into(),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Csv { .. } | Error::Read { .. } => {
                EXIT_CONFIG
            }
            Error::Invariant(_) => EXIT_INVARIANT,
            Error::Io { .. } | Error::Sim(_) | Error::Service(_) => EXIT_RUNTIME,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
