use crate::protocol::Capability;

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("{capability}: transport failure: {message}")]
    Transport { capability: Capability, message: String },
    #[error("{capability}: timed out")]
    Timeout { capability: Capability },
    #[error("{capability}: server returned {status}: {message}")]
    Remote {
        capability: Capability,
        status: u16,
        message: String,
        retriable: bool,
    },
    #[error("{capability}: malformed response: {message}")]
    Shape { capability: Capability, message: String },
    #[error("{capability}: undecodable payload: {message}")]
    Protocol { capability: Capability, message: String },
    #[error("{capability}: invalid request: {message}")]
    BadRequest { capability: Capability, message: String },
    #[error("no backend configured for {0}")]
    Unconfigured(Capability),
}

impl BackendError {
    /// Whether the same call might succeed later. Non-retriable errors make
    /// the current work item fail permanently.
    pub fn is_retriable(&self) -> bool {
        match self {
            BackendError::Transport { .. } | BackendError::Timeout { .. } => true,
            BackendError::Remote { retriable, .. } => *retriable,
            _ => false,
        }
    }

    pub fn capability(&self) -> Capability {
        match self {
            BackendError::Transport { capability, .. }
            | BackendError::Timeout { capability }
            | BackendError::Remote { capability, .. }
            | BackendError::Shape { capability, .. }
            | BackendError::Protocol { capability, .. }
            | BackendError::BadRequest { capability, .. } => *capability,
            BackendError::Unconfigured(c) => *c,
        }
    }

    pub(crate) fn shape(capability: Capability, message: impl Into<String>) -> Self {
        BackendError::Shape {
            capability,
            message: message.into(),
        }
    }

    pub fn bad_request(capability: Capability, message: impl Into<String>) -> Self {
        BackendError::BadRequest {
            capability,
            message: message.into(),
        }
    }
}

pub type Result<T, E = BackendError> = std::result::Result<T, E>;
