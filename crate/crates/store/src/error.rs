use thiserror::Error;

use crate::types::{Stage, Status};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage failure: {0}")]
    Sqlite(#[from] rusqlite::Error),
    #[error("item {stage}/{id} already exists")]
    Duplicate { stage: Stage, id: String },
    #[error("item {stage}/{id} not found")]
    NotFound { stage: Stage, id: String },
    #[error("item {stage}/{id} is {status}, expected {expected}")]
    WrongStatus {
        stage: Stage,
        id: String,
        status: Status,
        expected: Status,
    },
    #[error("lease on {stage}/{id} is held by {owner:?}, not {caller}")]
    NotOwner {
        stage: Stage,
        id: String,
        owner: Option<String>,
        caller: String,
    },
    #[error("lease on {stage}/{id} expired at {expiry}")]
    LeaseExpired { stage: Stage, id: String, expiry: f64 },
    #[error("track {0} already has a review decision")]
    AlreadyDecided(String),
    #[error("{0}")]
    Parse(String),
    #[error("corrupt metadata: {0}")]
    Json(#[from] serde_json::Error),
}

impl StoreError {
    /// Conflicts a client can resolve by refreshing state.
    pub fn is_conflict(&self) -> bool {
        matches!(
            self,
            StoreError::Duplicate { .. }
                | StoreError::WrongStatus { .. }
                | StoreError::NotOwner { .. }
                | StoreError::LeaseExpired { .. }
                | StoreError::AlreadyDecided(_)
        )
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;
