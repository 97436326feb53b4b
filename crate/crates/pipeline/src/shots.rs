//! Shot segmentation, still-clip removal, frame-rate resampling and
//! semantic scoring of clips.

use std::ops::Range;

use mf_backend::{Gateway, Image};
use mf_core::{FrameRef, GeomError, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ShotConfig;
use crate::error::Result;

/// 8-bit HSV with hue on a 256-step circle. Values are kept fractional.
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> [f64; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max * 255.0 } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else {
        let deg = if max == r {
            60.0 * ((g - b) / delta)
        } else if max == g {
            60.0 * ((b - r) / delta + 2.0)
        } else {
            60.0 * ((r - g) / delta + 4.0)
        };
        deg.rem_euclid(360.0) * 256.0 / 360.0
    };
    [h, s, max]
}

/// Mean over pixels of the mean absolute HSV channel difference; hue uses
/// the shorter way round its circle.
pub fn mean_hsv_diff(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(GeomError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        }
        .into());
    }
    let n = a.width() * a.height();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (pa, pb) in a.as_raw().chunks_exact(3).zip(b.as_raw().chunks_exact(3)) {
        if pa == pb {
            continue;
        }
        let ha = rgb_to_hsv([pa[0], pa[1], pa[2]]);
        let hb = rgb_to_hsv([pb[0], pb[1], pb[2]]);
        let dh = (ha[0] - hb[0]).abs();
        let dh = dh.min(256.0 - dh);
        total += (dh + (ha[1] - hb[1]).abs() + (ha[2] - hb[2]).abs()) / 3.0;
    }
    Ok(total / n as f64)
}

/// `diffs[i]` compares frames `i - 1` and `i`; `diffs[0]` is zero.
pub fn consecutive_diffs(frames: &[RgbImage]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; frames.len()];
    for i in 1..frames.len() {
        out[i] = mean_hsv_diff(&frames[i - 1], &frames[i])?;
    }
    Ok(out)
}

fn cuts_from_diffs(diffs: &[f64], threshold: f64) -> Vec<usize> {
    (1..diffs.len()).filter(|&i| diffs[i] >= threshold).collect()
}

/// Frame indices that start a new shot.
pub fn detect_shots(frames: &[RgbImage], threshold: f64) -> Result<Vec<usize>> {
    Ok(cuts_from_diffs(&consecutive_diffs(frames)?, threshold))
}

/// Source frames kept when resampling `range` from `fps` to `target_fps`:
/// for each point of the target time grid, the nearest source frame. Sources
/// at or below the target rate are kept whole.
pub fn resample(range: Range<usize>, fps: f64, target_fps: f64) -> Vec<FrameRef> {
    if range.is_empty() {
        return vec![];
    }
    let chosen: Vec<usize> = if fps <= target_fps {
        range.clone().collect()
    } else {
        let t0 = range.start as f64 / fps;
        let t_last = (range.end - 1) as f64 / fps;
        let mut out = Vec::new();
        let mut j = 0usize;
        loop {
            let t = t0 + j as f64 / target_fps;
            if t > t_last + 1e-9 {
                break;
            }
            let idx = ((t * fps).round() as usize).clamp(range.start, range.end - 1);
            if out.last() != Some(&idx) {
                out.push(idx);
            }
            j += 1;
        }
        out
    };
    chosen
        .into_iter()
        .enumerate()
        .map(|(index, source_index)| FrameRef {
            index,
            source_index,
            timestamp: source_index as f64 / fps,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipPlan {
    /// Source frames of the whole shot.
    pub shot: Range<usize>,
    /// Resampled frames making up the clip.
    pub frames: Vec<FrameRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    TooShort { shot: Range<usize>, frames: usize },
    Still { shot: Range<usize> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub cuts: Vec<usize>,
    pub clips: Vec<ClipPlan>,
    pub rejected: Vec<Rejection>,
}

/// Splits a video at shot changes and keeps the shots that are neither
/// still nor shorter than `min_len` after resampling.
pub fn split_and_filter(frames: &[RgbImage], fps: f64, cfg: &ShotConfig) -> Result<SplitResult> {
    let diffs = consecutive_diffs(frames)?;
    let cuts = cuts_from_diffs(&diffs, cfg.threshold);
    let mut bounds = vec![0];
    bounds.extend(&cuts);
    bounds.push(frames.len());
    let mut out = SplitResult {
        cuts,
        ..Default::default()
    };
    for w in bounds.windows(2) {
        let shot = w[0]..w[1];
        if shot.is_empty() {
            continue;
        }
        let moving = (shot.start + 1..shot.end).any(|i| diffs[i] >= cfg.still_eps);
        if !moving {
            out.rejected.push(Rejection::Still { shot });
            continue;
        }
        let kept = resample(shot.clone(), fps, cfg.target_fps);
        if kept.len() < cfg.min_len {
            out.rejected.push(Rejection::TooShort {
                shot,
                frames: kept.len(),
            });
            continue;
        }
        out.clips.push(ClipPlan { shot, frames: kept });
    }
    Ok(out)
}

/// Up to `n` distinct frame indices below `len`, sorted, drawn with a seeded
/// generator.
pub fn sample_frames(len: usize, n: usize, seed: u64) -> Vec<usize> {
    if len <= n {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, len, n).into_vec();
    picked.sort_unstable();
    picked
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn semantic_prompt(category: &str) -> String {
    format!("A photo of {category}.")
}

/// Mean of `weight · max(cos(image, text), 0)` over the given frames.
pub fn semantic_score(gateway: &Gateway, category: &str, images: Vec<Image>, weight: f64) -> Result<f64> {
    if images.is_empty() {
        return Ok(0.0);
    }
    let text = gateway.embed_texts(vec![semantic_prompt(category)])?.remove(0);
    let n = images.len();
    let embeddings = gateway.embed_images(images, false)?.embeddings;
    let total: f64 = embeddings.iter().map(|e| weight * cosine(e, &text).max(0.0)).sum();
    Ok(total / n as f64)
}
