use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the planning engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected because of mismatched shapes or out-of-range arguments.
    #[error("rejected input: {0}")]
    RejectedInput(String),

    /// A file did not follow the expected binary or text layout.
    #[error("format error: {0}")]
    Format(String),

    /// Invalid configuration or an unusable combination of options.
    #[error("configuration error: {0}")]
    Config(String),

    /// An action was requested that the world does not afford.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A world description broke one of the scene invariants.
    #[error("invalid world: {0}")]
    InvalidWorld(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
