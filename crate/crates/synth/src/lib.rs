//! Procedural test scenes with exact annotations, and model backends that
//! answer from them.
//!
//! A [`SceneSpec`] scripts a short video: coloured background shots, moving
//! ellipse or quadruped actors, static occluders, and tracker failures (lost
//! frames, identity swaps). [`Scene`] evaluates masks, keypoints, depth and
//! flow analytically on the full frame or on any crop window, and
//! [`SyntheticBackend`] serves every model capability from those values.

mod backend;
pub mod corpus;
mod scene;
mod spec;

pub use backend::{NoiseConfig, SyntheticBackend, EMBED_DIM, FEATURE_CHANNELS};
pub use scene::{carry, Pose, Scene, Surface, View, BACKGROUND_DEPTH};
pub use spec::*;

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn mix_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| mix64(h ^ b as u64))
}
