//! JSON records written next to the media of each work item.

use std::ops::Range;

use mf_core::{BBoxF64, FrameRef};
use serde::{Deserialize, Serialize};

use crate::track::{Pass, ProvenanceEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub title: String,
    pub fps: f64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub category: String,
    #[serde(default)]
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub video_id: String,
    pub category: String,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    /// Source frames of the shot this clip was cut from.
    pub shot: Range<usize>,
    pub frames: Vec<FrameRef>,
    pub semantic_score: f64,
    /// Clip frames scored, drawn with `semantic_seed`.
    pub semantic_frames: Vec<usize>,
    pub semantic_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    /// Position within the track; names the media files.
    pub index: usize,
    pub clip_frame: usize,
    pub source_frame: usize,
    /// Full-frame box before cropping.
    pub bbox: BBoxF64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub track_id: String,
    pub clip_id: String,
    pub video_id: String,
    pub category: String,
    pub crop_size: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    pub frames: Vec<TrackFrame>,
}

impl TrackRecord {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn source_range(&self) -> Option<Range<usize>> {
        Some(self.frames.first()?.source_frame..self.frames.last()?.source_frame + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub track_id: String,
    pub clip_id: String,
    pub proposal: u32,
    pub segment: u32,
    pub events: Vec<ProvenanceEvent>,
}

impl Provenance {
    pub fn frames_removed_by(&self, pass: Pass) -> Vec<usize> {
        self.events
            .iter()
            .filter(|e| e.pass == pass)
            .flat_map(|e| e.frames.iter().copied())
            .collect()
    }
}

/// Outcome of tracking one clip, kept in the clip directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub clip_id: String,
    pub proposals: usize,
    pub kept: Vec<String>,
    pub dropped: Vec<DroppedTrack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedTrack {
    pub proposal: u32,
    pub segment: u32,
    pub clip_frames: Vec<usize>,
    pub events: Vec<ProvenanceEvent>,
}
