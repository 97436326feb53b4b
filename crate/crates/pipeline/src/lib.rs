//! The motion-data pipeline: stage processors that turn raw videos into
//! cropped, annotated animal tracks, and the worker loops that run them
//! against a shared store.
//!
//! Stages run in order `collect → preprocess → track → feature`, each
//! enqueuing the items of the next. Model calls go through a
//! [`mf_backend::Gateway`].

pub mod config;
mod error;
pub mod features;
pub mod media;
pub mod records;
pub mod shots;
pub mod stages;
pub mod track;
pub mod worker;

pub use config::Config;
pub use error::{PipelineError, Result};
pub use stages::{build_gateway, process, seed_collect, Context};
pub use worker::{run_stage, RunOptions, RunReport};

/// 64-bit FNV-1a, used to derive per-item seeds from ids.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
