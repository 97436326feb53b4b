use thiserror::Error;

use mf_backend::BackendError;
use mf_core::GeomError;
use mf_store::StoreError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Media { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl PipelineError {
    /// Whether retrying the same item later may succeed.
    pub fn is_retriable(&self) -> bool {
        match self {
            PipelineError::Backend(e) => e.is_retriable(),
            PipelineError::Store(e) => matches!(e, StoreError::Sqlite(_)),
            PipelineError::Io { .. } => true,
            _ => false,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn media(path: impl AsRef<std::path::Path>, message: impl ToString) -> Self {
        PipelineError::Media {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

impl From<mf_backend::queries::QueryError> for PipelineError {
    fn from(e: mf_backend::queries::QueryError) -> Self {
        match e {
            mf_backend::queries::QueryError::Backend(b) => PipelineError::Backend(b),
            other => PipelineError::Invalid(other.to_string()),
        }
    }
}
