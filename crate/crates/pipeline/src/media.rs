//! On-disk layout and file formats for frames, masks and per-frame features.
//!
//! ```text
//! <data>/videos/<video>/video.json, frames/%06d.png
//! <data>/clips/<clip>/clip.json, frames/%06d.png
//! <data>/tracks/<track>/track.json, crop_windows.json, provenance.json,
//!                       rgb/%06d.png, mask/%06d.png,
//!                       features/{kp,depth,flow,feat}/..., depth_meta.json,
//!                       occlusion.json, summary.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use mf_backend::png;
use mf_core::{Grid, KeypointsF64, Mask, RgbImage};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn video_dir(&self, id: &str) -> PathBuf {
        self.root.join("videos").join(id)
    }

    pub fn clip_dir(&self, id: &str) -> PathBuf {
        self.root.join("clips").join(id)
    }

    pub fn track_dir(&self, id: &str) -> PathBuf {
        self.root.join("tracks").join(id)
    }
}

pub fn frame_name(index: usize, ext: &str) -> String {
    format!("{index:06}.{ext}")
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| PipelineError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| PipelineError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::media(path, e))?;
    text.push(b'\n');
    write_bytes(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_bytes(path)?).map_err(|e| PipelineError::media(path, e))
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    write_bytes(path, &png::encode_rgb(img))
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    png::decode_rgb(&read_bytes(path)?).map_err(|e| PipelineError::media(path, e))
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    write_bytes(path, &png::encode_mask(mask))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    png::decode_mask(&read_bytes(path)?).map_err(|e| PipelineError::media(path, e))
}

pub fn write_grid(path: &Path, grid: &Grid<f32>) -> Result<()> {
    write_bytes(path, &grid.encode())
}

pub fn read_grid(path: &Path) -> Result<Grid<f32>> {
    Grid::decode(&read_bytes(path)?).map_err(|e| PipelineError::media(path, e))
}

pub fn write_keypoints(path: &Path, kp: &KeypointsF64) -> Result<()> {
    write_json(path, kp)
}

pub fn read_keypoints(path: &Path) -> Result<KeypointsF64> {
    read_json(path)
}

/// Value range of one depth frame before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRange {
    pub frame: usize,
    pub min: f32,
    pub max: f32,
}

/// Writes a depth grid normalized to `[0, 1]` as a 16-bit PNG and returns
/// the range needed to undo the normalization.
pub fn write_depth(path: &Path, frame: usize, depth: &Grid<f32>) -> Result<DepthRange> {
    let (norm, min, max) = depth.normalized();
    let values: Vec<u16> = norm
        .values()
        .iter()
        .step_by(depth.channels())
        .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    write_bytes(path, &png::encode_gray16(depth.width(), depth.height(), &values))?;
    Ok(DepthRange { frame, min, max })
}

/// Reads a 16-bit depth PNG as normalized values in `[0, 1]`.
pub fn read_depth_normalized(path: &Path) -> Result<Grid<f32>> {
    let (w, h, values) = png::decode_gray16(&read_bytes(path)?).map_err(|e| PipelineError::media(path, e))?;
    let values = values.into_iter().map(|v| v as f32 / 65535.0).collect();
    Ok(Grid::from_values(w, h, 1, values)?)
}

/// Reads a depth PNG back into its original units.
pub fn read_depth(path: &Path, range: &DepthRange) -> Result<Grid<f32>> {
    let norm = read_depth_normalized(path)?;
    let span = range.max - range.min;
    let values = norm.values().iter().map(|v| range.min + v * span).collect();
    Ok(Grid::from_values(norm.width(), norm.height(), 1, values)?)
}

/// Hard-links `src` to `dst`, copying when linking is not possible.
pub fn link_or_copy(src: &Path, dst: &Path) -> Result<()> {
    if fs::hard_link(src, dst).is_ok() {
        return Ok(());
    }
    fs::copy(src, dst).map(|_| ()).map_err(|e| PipelineError::io(dst, e))
}

/// Counts `%06d.<ext>` files in `dir` and checks they are numbered `0..n`.
pub fn count_frames(dir: &Path, ext: &str) -> Result<usize> {
    let entries = fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut n = 0;
    for e in entries {
        let name = e.map_err(|e| PipelineError::io(dir, e))?.file_name();
        if Path::new(&name).extension().is_some_and(|x| x == ext) {
            n += 1;
        }
    }
    for i in 0..n {
        if !dir.join(frame_name(i, ext)).is_file() {
            return Err(PipelineError::media(dir, format!("frame {} missing from a sequence of {n}", i)));
        }
    }
    Ok(n)
}

/// Directory staged next to `target` and renamed into place on commit, so
/// readers see either nothing or the complete result.
#[derive(Debug)]
pub struct StagedDir {
    staging: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl StagedDir {
    pub fn new(target: impl Into<PathBuf>) -> Result<Self> {
        let target = target.into();
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let staging = target.with_file_name(format!(".{name}.staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| PipelineError::io(&staging, e))?;
        }
        create_dir(&staging)?;
        Ok(Self {
            staging,
            target,
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.staging
    }

    /// Replaces any previous `target` with the staged contents.
    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| PipelineError::io(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| PipelineError::io(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
