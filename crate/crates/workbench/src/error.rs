use std::path::PathBuf;

pub type Result<T, E = WbError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum WbError {
    #[error(transparent)]
    Core(#[from] citrus_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl WbError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WbError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        WbError::Format(msg.into())
    }
}
