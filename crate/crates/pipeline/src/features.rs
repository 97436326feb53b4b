//! Feature stage: keypoints, depth, flow and dense features for a cropped
//! track, occlusion boundaries, and track-level summaries.

use std::path::{Path, PathBuf};

use mf_backend::{Gateway, Image};
use mf_core::metrics::temporal_roughness;
use mf_core::{occlusion_boundary, DepthGrid, FeatureGrid, FlowGrid, KeypointsF64, Mask, OcclusionMapF32, Skeleton};
use serde::{Deserialize, Serialize};

use crate::config::FeatureConfig;
use crate::error::{PipelineError, Result};
use crate::media::{self, frame_name, DepthRange, StagedDir};

/// Mean flow magnitude over each frame's foreground cells, averaged over
/// frames; frames with an empty mask are skipped.
pub fn mean_flow_magnitude(flows: &[FlowGrid], masks: &[Mask]) -> Result<f64> {
    let mut per_frame = Vec::new();
    for (flow, mask) in flows.iter().zip(masks) {
        if flow.dims() != mask.dims() {
            return Err(mf_core::GeomError::DimensionMismatch {
                left: flow.dims(),
                right: mask.dims(),
            }
            .into());
        }
        let norms: Vec<f64> = mask
            .pixels()
            .map(|(x, y)| {
                let c = flow.cell(x, y);
                (c[0] as f64).hypot(c[1] as f64)
            })
            .collect();
        if !norms.is_empty() {
            per_frame.push(norms.iter().sum::<f64>() / norms.len() as f64);
        }
    }
    Ok(if per_frame.is_empty() {
        0.0
    } else {
        per_frame.iter().sum::<f64>() / per_frame.len() as f64
    })
}

/// Roughness of the keypoint trajectory in crop-normalized coordinates.
pub fn keypoint_roughness(keypoints: &[KeypointsF64], crop_size: usize) -> f64 {
    let seq: Vec<Vec<f64>> = keypoints
        .iter()
        .map(|k| k.flat_coords().into_iter().map(|v| v / crop_size as f64).collect())
        .collect();
    temporal_roughness(&seq).map(|r| r.value).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOcclusion {
    pub frame: usize,
    pub fraction: f32,
    #[serde(flatten)]
    pub map: OcclusionMapF32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionFile {
    pub radius: usize,
    pub tau: f64,
    pub frames: Vec<FrameOcclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub frames: usize,
    pub mean_occlusion: f64,
    pub mean_flow: f64,
    pub roughness: f64,
    pub feature_dim: usize,
}

/// Everything extracted for one track, held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub keypoints: Vec<KeypointsF64>,
    pub depth: Vec<DepthGrid>,
    /// `flow[t]` maps frame `t` to `t + 1`.
    pub flow: Vec<FlowGrid>,
    pub features: Vec<FeatureGrid>,
    pub occlusion: Vec<OcclusionMapF32>,
    pub summary: FeatureSummary,
}

/// Calls the backends on a track's crops, in batches, and assembles the set.
pub fn extract_features(
    gateway: &Gateway,
    images: &[Image],
    masks: &[Mask],
    skeleton: &Skeleton,
    cfg: &FeatureConfig,
) -> Result<FeatureSet> {
    if images.len() != masks.len() {
        return Err(PipelineError::Invalid(format!(
            "{} crops but {} masks",
            images.len(),
            masks.len()
        )));
    }
    let n = images.len();
    let (mut keypoints, mut depth, mut features, mut flow) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for chunk in (0..n).collect::<Vec<_>>().chunks(cfg.batch) {
        let batch: Vec<Image> = chunk.iter().map(|&i| images[i].clone()).collect();
        keypoints.extend(gateway.keypoints(batch.clone(), skeleton)?);
        depth.extend(gateway.depth(batch.clone())?);
        features.extend(gateway.embed_images(batch, true)?.grids);
        let pairs: Vec<[Image; 2]> = chunk
            .iter()
            .filter(|&&i| i + 1 < n)
            .map(|&i| [images[i].clone(), images[i + 1].clone()])
            .collect();
        if !pairs.is_empty() {
            flow.extend(gateway.flow(pairs)?);
        }
    }
    let occlusion = masks
        .iter()
        .zip(&depth)
        .map(|(m, d)| {
            let (norm, _, _) = d.normalized();
            occlusion_boundary(m, &norm, cfg.occlusion_radius, cfg.occlusion_tau as f32)
        })
        .collect::<mf_core::Result<Vec<_>>>()?;
    let mean_occlusion = if n == 0 {
        0.0
    } else {
        occlusion.iter().map(|o| o.fraction() as f64).sum::<f64>() / n as f64
    };
    let crop_size = images.first().map_or(1, |i| i.dims().0);
    let summary = FeatureSummary {
        frames: n,
        mean_occlusion,
        mean_flow: mean_flow_magnitude(&flow, masks)?,
        roughness: keypoint_roughness(&keypoints, crop_size),
        feature_dim: features.first().map_or(0, |g| g.channels()),
    };
    Ok(FeatureSet {
        keypoints,
        depth,
        flow,
        features,
        occlusion,
        summary,
    })
}

/// Writes a feature set to `<track>/features`, replacing any earlier
/// result only once every file is in place.
pub fn persist(track_dir: &Path, set: &FeatureSet, cfg: &FeatureConfig) -> Result<PathBuf> {
    let staged = StagedDir::new(track_dir.join("features"))?;
    let root = staged.path();
    for sub in ["kp", "depth", "flow", "feat"] {
        media::create_dir(&root.join(sub))?;
    }
    let mut ranges: Vec<DepthRange> = Vec::new();
    for (i, kp) in set.keypoints.iter().enumerate() {
        media::write_keypoints(&root.join("kp").join(frame_name(i, "json")), kp)?;
    }
    for (i, d) in set.depth.iter().enumerate() {
        ranges.push(media::write_depth(&root.join("depth").join(frame_name(i, "png")), i, d)?);
    }
    for (i, f) in set.flow.iter().enumerate() {
        media::write_grid(&root.join("flow").join(frame_name(i, "bin")), f)?;
    }
    for (i, f) in set.features.iter().enumerate() {
        media::write_grid(&root.join("feat").join(frame_name(i, "bin")), f)?;
    }
    media::write_json(&root.join("depth_meta.json"), &ranges)?;
    let occlusion = OcclusionFile {
        radius: cfg.occlusion_radius,
        tau: cfg.occlusion_tau,
        frames: set
            .occlusion
            .iter()
            .enumerate()
            .map(|(frame, map)| FrameOcclusion {
                frame,
                fraction: map.fraction(),
                map: map.clone(),
            })
            .collect(),
    };
    media::write_json(&root.join("occlusion.json"), &occlusion)?;
    media::write_json(&root.join("summary.json"), &set.summary)?;
    staged.commit()
}

/// Checks that a persisted feature directory is complete and decodable.
pub fn validate(features_dir: &Path, frames: usize) -> Result<FeatureSummary> {
    let summary: FeatureSummary = media::read_json(&features_dir.join("summary.json"))?;
    let expect = |dir: &str, ext: &str, n: usize| -> Result<()> {
        let got = media::count_frames(&features_dir.join(dir), ext)?;
        if got != n {
            return Err(PipelineError::media(
                features_dir.join(dir),
                format!("{got} files, expected {n}"),
            ));
        }
        Ok(())
    };
    expect("kp", "json", frames)?;
    expect("depth", "png", frames)?;
    expect("feat", "bin", frames)?;
    expect("flow", "bin", frames.saturating_sub(1))?;
    let _: Vec<DepthRange> = media::read_json(&features_dir.join("depth_meta.json"))?;
    let _: OcclusionFile = media::read_json(&features_dir.join("occlusion.json"))?;
    for i in 0..frames {
        media::read_keypoints(&features_dir.join("kp").join(frame_name(i, "json")))?;
    }
    Ok(summary)
}
