//! Ground truth for exported synthetic tracks, rendered from the scene
//! scripts through each frame's crop window.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use mf_core::{KeypointsF64, Mask};
use mf_synth::{Scene, SyntheticBackend, View};

use crate::manifest::{BenchmarkManifest, CropEntry, ManifestSequence};
use crate::predictions;

/// The actor most often nearest the window centre.
pub fn identify_actor(scene: &Scene, windows: &[CropEntry], size: usize) -> Option<usize> {
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for w in windows {
        if let Some(i) = scene.actor_at_view_center(w.source_frame, &View::Crop(w.hint(size))) {
            *votes.entry(i).or_default() += 1;
        }
    }
    votes.into_iter().max_by_key(|&(i, n)| (n, std::cmp::Reverse(i))).map(|(i, _)| i)
}

pub fn scene_truth(scene: &Scene, seq: &ManifestSequence, windows: &[CropEntry]) -> Result<(Vec<Mask>, Vec<KeypointsF64>)> {
    let actor = identify_actor(scene, windows, seq.crop_size)
        .ok_or_else(|| anyhow!("{}: no actor under the crop windows", seq.track_id))?;
    let mut masks = Vec::with_capacity(windows.len());
    let mut kps = Vec::with_capacity(windows.len());
    for w in windows {
        let view = View::Crop(w.hint(seq.crop_size));
        masks.push(scene.mask(actor, w.source_frame, &view));
        kps.push(
            scene
                .keypoints(actor, w.source_frame, &view)
                .ok_or_else(|| anyhow!("{}: actor absent on source frame {}", seq.track_id, w.source_frame))?,
        );
    }
    Ok((masks, kps))
}

/// Writes scene truth for every manifest sequence as method `method` under
/// the predictions root. Returns the number of sequences written.
pub fn write_oracle(
    backend: &SyntheticBackend,
    manifest: &BenchmarkManifest,
    root: &Path,
    out: &Path,
    method: &str,
) -> Result<usize> {
    let mut n = 0;
    for seq in &manifest.sequences {
        let Some(scene) = backend.scene(&seq.video_id) else {
            bail!("{}: no scene named '{}'", seq.track_id, seq.video_id);
        };
        let windows = manifest.crop_windows(root, seq)?;
        let (masks, kps) = scene_truth(scene, seq, &windows)?;
        predictions::write_sequence(&out.join(method).join(&seq.track_id), &masks, &kps, None)?;
        n += 1;
    }
    Ok(n)
}
