//! Persistent work registry for the pipeline stages.
//!
//! Items move `unprocessed -> processing -> completed | discarded`. Claiming
//! sets a lease; an item whose lease lapses becomes claimable again, so a
//! crashed worker never strands work. Media lives on the filesystem and the
//! store only keeps paths and metadata.

mod clock;
mod error;
mod store;
mod types;

pub use clock::{Clock, ManualClock, SystemClock};
pub use error::{Result, StoreError};
pub use store::{Store, DEFAULT_LEASE_SECS};
pub use types::{
    CompareOp, CurationRecord, Decision, Filter, Kind, MetaPredicate, Metadata, Outcome, ReviewCriteria, Stage,
    Status, WorkItem,
};

/// Environment variable naming the store file.
pub const STORE_PATH_ENV: &str = "MF_STORE";
