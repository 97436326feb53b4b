//! Method predictions on disk:
//! `<root>/<method>/<track_id>/mask/%06d.png`, `kp/%06d.json` and, when a
//! method reports mesh vertices, `vertices/%06d.json` (a list of `[x, y]`).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context as _, Result};
use mf_core::metrics::{Point2, SequencePrediction};
use mf_core::{KeypointsF64, Mask};
use mf_pipeline::media::{self, frame_name};

use crate::manifest::BenchmarkManifest;

pub type PredictionSet = BTreeMap<String, BTreeMap<String, SequencePrediction<f64>>>;

pub fn write_sequence(
    dir: &Path,
    masks: &[Mask],
    keypoints: &[KeypointsF64],
    vertices: Option<&[Vec<Point2<f64>>]>,
) -> Result<()> {
    for sub in ["mask", "kp"] {
        media::create_dir(&dir.join(sub))?;
    }
    for (i, m) in masks.iter().enumerate() {
        media::write_mask(&dir.join("mask").join(frame_name(i, "png")), m)?;
    }
    for (i, k) in keypoints.iter().enumerate() {
        media::write_keypoints(&dir.join("kp").join(frame_name(i, "json")), k)?;
    }
    if let Some(vs) = vertices {
        media::create_dir(&dir.join("vertices"))?;
        for (i, v) in vs.iter().enumerate() {
            media::write_json(&dir.join("vertices").join(frame_name(i, "json")), v)?;
        }
    }
    Ok(())
}

/// Reads every contiguous frame `%06d.ext` in `dir` from 0.
fn read_frames<T>(dir: &Path, ext: &str, read: impl Fn(&Path) -> mf_pipeline::Result<T>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    loop {
        let p = dir.join(frame_name(out.len(), ext));
        if !p.is_file() {
            return Ok(out);
        }
        out.push(read(&p).with_context(|| format!("reading {}", p.display()))?);
    }
}

pub fn read_sequence(dir: &Path) -> Result<SequencePrediction<f64>> {
    let masks = read_frames(&dir.join("mask"), "png", media::read_mask)?;
    let keypoints = read_frames(&dir.join("kp"), "json", media::read_keypoints)?;
    let vdir = dir.join("vertices");
    let vertices = if vdir.is_dir() {
        Some(read_frames(&vdir, "json", |p| media::read_json::<Vec<Point2<f64>>>(p))?)
    } else {
        None
    };
    Ok(SequencePrediction {
        masks,
        keypoints,
        vertices,
    })
}

/// Loads each method directory under `root` for the manifest's tracks.
/// Returns the predictions and, per method, tracks that failed to load.
pub fn load(root: &Path, manifest: &BenchmarkManifest) -> Result<(PredictionSet, BTreeMap<String, Vec<(String, String)>>)> {
    let mut set = PredictionSet::new();
    let mut failures: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    let mut methods: Vec<_> = std::fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    methods.sort();
    for method in methods {
        let preds = set.entry(method.clone()).or_default();
        for s in &manifest.sequences {
            let dir = root.join(&method).join(&s.track_id);
            if !dir.is_dir() {
                continue;
            }
            match read_sequence(&dir) {
                Ok(p) => {
                    preds.insert(s.track_id.clone(), p);
                }
                Err(e) => failures.entry(method.clone()).or_default().push((s.track_id.clone(), format!("{e:#}"))),
            }
        }
    }
    Ok((set, failures))
}
