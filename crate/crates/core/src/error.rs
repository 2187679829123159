use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A reference (link endpoint, hypernym pointer, synset) that does not resolve.
    #[error("unresolved reference: {0}")]
    Reference(String),

    #[error("capacity: {0}")]
    Capacity(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("training: {0}")]
    Training(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("geocoding provider failed: {0}")]
    Provider(String),

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    Version { found: u32, supported: u32 },

    #[error("corrupted model file: {0}")]
    Corrupt(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
