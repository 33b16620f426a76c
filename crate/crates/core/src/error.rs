use std::path::PathBuf;

/// Errors produced anywhere in the selection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("{0}: no rating records")]
    NoRatings(String),

    #[error("invalid hyperparameter for {algorithm}: {msg}")]
    Hyperparameter { algorithm: String, msg: String },

    #[error("feature width {found} does not match schema ({} columns: {})", expected.len(), expected.join(", "))]
    Schema { expected: Vec<String>, found: usize },

    #[error("insufficient variance: {0}")]
    InsufficientVariance(String),

    #[error("non-finite prediction from {algorithm} on instance {instance}")]
    NonFinite { algorithm: String, instance: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
