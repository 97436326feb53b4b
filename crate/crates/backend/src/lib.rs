//! Pluggable model backends.
//!
//! Pipeline stages talk to a [`Gateway`], which routes each capability to a
//! [`Backend`]: an [`HttpBackend`] for external adapter services or any
//! in-process implementation. [`server::router`] exposes a backend over the
//! same wire protocol.

mod error;
mod gateway;
pub mod http;
pub mod png;
pub mod protocol;
pub mod queries;
pub mod server;

pub use error::{BackendError, Result};
pub use gateway::{Backend, Gateway, GatewayConfig};
pub use http::HttpBackend;
pub use protocol::*;
