//! Operator tooling for the motion-track pipeline: configuration and stage
//! running, the review service, benchmark export and evaluation.

pub mod app;
pub mod export;
pub mod manifest;
pub mod oracle;
pub mod overlay;
pub mod predictions;
pub mod review;

pub use manifest::{BenchmarkManifest, CropEntry, ManifestSequence};
