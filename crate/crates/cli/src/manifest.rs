//! The benchmark manifest: the index of curated sequences and the files
//! that hold their annotations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use mf_core::metrics::SequenceTruth;
use mf_core::{Mask, Skeleton};
use mf_pipeline::media::{self, frame_name};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkManifest {
    pub version: u32,
    pub skeleton: Skeleton,
    pub categories: Vec<String>,
    pub sequences: Vec<ManifestSequence>,
}

/// One curated track. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSequence {
    pub track_id: String,
    pub category: String,
    pub video_id: String,
    pub frames: usize,
    pub crop_size: usize,
    pub rgb: String,
    pub masks: String,
    pub keypoints: String,
    pub crop_windows: String,
}

/// Where crop frame `frame` came from in its source video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropEntry {
    pub frame: usize,
    pub source_frame: usize,
    pub cx: f64,
    pub cy: f64,
    pub side: f64,
    pub padded: bool,
}

impl CropEntry {
    pub fn hint(&self, size: usize) -> mf_backend::CropHint {
        mf_backend::CropHint {
            cx: self.cx,
            cy: self.cy,
            side: self.side,
            size,
        }
    }
}

impl BenchmarkManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.version != MANIFEST_VERSION {
            bail!("{}: unsupported manifest version {}", path.display(), m.version);
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn sequence(&self, track_id: &str) -> Option<&ManifestSequence> {
        self.sequences.iter().find(|s| s.track_id == track_id)
    }

    /// Checks every referenced file. Returns one line per problem.
    pub fn problems(&self, root: &Path) -> Vec<String> {
        let mut out = Vec::new();
        for c in self.sequences.iter().map(|s| &s.category) {
            if !self.categories.contains(c) {
                out.push(format!("category {c} missing from the category list"));
            }
        }
        for s in &self.sequences {
            let k = self.skeleton.joints.len();
            let side = s.crop_size;
            for i in 0..s.frames {
                let rgb = root.join(&s.rgb).join(frame_name(i, "png"));
                match media::read_rgb(&rgb) {
                    Ok(img) if img.dims() == (side, side) => {}
                    Ok(img) => out.push(format!("{}: {:?} pixels, expected {side}x{side}", rgb.display(), img.dims())),
                    Err(e) => out.push(e.to_string()),
                }
                let mask = root.join(&s.masks).join(frame_name(i, "png"));
                match media::read_mask(&mask) {
                    Ok(m) if m.dims() == (side, side) => {}
                    Ok(m) => out.push(format!("{}: {:?} pixels, expected {side}x{side}", mask.display(), m.dims())),
                    Err(e) => out.push(e.to_string()),
                }
                let kp = root.join(&s.keypoints).join(frame_name(i, "json"));
                match media::read_keypoints(&kp) {
                    Ok(p) if p.len() == k => {}
                    Ok(p) => out.push(format!("{}: {} joints, expected {k}", kp.display(), p.len())),
                    Err(e) => out.push(e.to_string()),
                }
            }
            match self.crop_windows(root, s) {
                Ok(w) if w.len() == s.frames => {}
                Ok(w) => out.push(format!("{}: {} crop windows for {} frames", s.track_id, w.len(), s.frames)),
                Err(e) => out.push(format!("{e:#}")),
            }
        }
        out
    }

    pub fn crop_windows(&self, root: &Path, seq: &ManifestSequence) -> Result<Vec<CropEntry>> {
        Ok(media::read_json(&root.join(&seq.crop_windows))?)
    }

    /// Loads every sequence's masks and keypoints.
    pub fn load_truth(&self, root: &Path) -> Result<Vec<SequenceTruth<f64>>> {
        self.sequences
            .iter()
            .map(|s| {
                let masks = (0..s.frames)
                    .map(|i| media::read_mask(&root.join(&s.masks).join(frame_name(i, "png"))))
                    .collect::<mf_pipeline::Result<Vec<Mask>>>()?;
                let keypoints = (0..s.frames)
                    .map(|i| media::read_keypoints(&root.join(&s.keypoints).join(frame_name(i, "json"))))
                    .collect::<mf_pipeline::Result<Vec<_>>>()?;
                Ok(SequenceTruth {
                    track_id: s.track_id.clone(),
                    category: s.category.clone(),
                    image_side: s.crop_size as f64,
                    masks,
                    keypoints,
                })
            })
            .collect()
    }
}

/// The manifest inside a benchmark directory, or the file itself.
pub fn resolve(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.join(MANIFEST_FILE), path.to_path_buf())
    } else {
        let root = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        (path.to_path_buf(), root)
    }
}
