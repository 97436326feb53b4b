//! Benchmark export: copies accepted tracks into a self-contained directory
//! with a manifest.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use mf_core::Skeleton;
use mf_pipeline::media::{self, frame_name, Layout, StagedDir};
use mf_pipeline::records::TrackRecord;
use mf_pipeline::track::CropWindow;
use mf_store::{Decision, Store};

use crate::manifest::{BenchmarkManifest, CropEntry, ManifestSequence, MANIFEST_FILE, MANIFEST_VERSION};

pub const DEFAULT_CAP: usize = 10;

/// Accepted track ids per category, earliest decision first, at most `cap` each.
pub fn select(store: &Store, cap: usize) -> Result<BTreeMap<String, Vec<String>>> {
    let mut picked: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for rec in store.curation(Some(Decision::Accept))? {
        let category = rec.category.clone().unwrap_or_default();
        let list = picked.entry(category).or_default();
        if list.len() < cap {
            list.push(rec.track_id);
        }
    }
    Ok(picked)
}

struct Source {
    record: TrackRecord,
    windows: Vec<CropWindow>,
}

fn required_files(layout: &Layout, record: &TrackRecord) -> Vec<std::path::PathBuf> {
    let dir = layout.track_dir(&record.track_id);
    let mut files = vec![dir.join("crop_windows.json")];
    for i in 0..record.len() {
        files.push(dir.join("rgb").join(frame_name(i, "png")));
        files.push(dir.join("mask").join(frame_name(i, "png")));
        files.push(dir.join("features/kp").join(frame_name(i, "json")));
    }
    files
}

/// Writes the export to `out`, replacing what was there only when every
/// file has been copied and the new manifest validates.
pub fn export_benchmark(store: &Store, layout: &Layout, skeleton: &Skeleton, out: &Path, cap: usize) -> Result<BenchmarkManifest> {
    let picked = select(store, cap)?;
    if picked.values().all(Vec::is_empty) {
        bail!("no accepted tracks to export");
    }
    let mut sources = Vec::new();
    let mut missing = Vec::new();
    for id in picked.values().flatten() {
        let dir = layout.track_dir(id);
        let record: TrackRecord = match media::read_json(&dir.join("track.json")) {
            Ok(r) => r,
            Err(_) => {
                missing.push(dir.join("track.json").display().to_string());
                continue;
            }
        };
        let before = missing.len();
        missing.extend(required_files(layout, &record).into_iter().filter(|p| !p.is_file()).map(|p| p.display().to_string()));
        if missing.len() == before {
            let windows = media::read_json(&dir.join("crop_windows.json"))?;
            sources.push(Source { record, windows });
        }
    }
    if !missing.is_empty() {
        bail!("export aborted, missing files:\n  {}", missing.join("\n  "));
    }

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        media::create_dir(parent)?;
    }
    let staged = StagedDir::new(out)?;
    let root = staged.path();
    let mut sequences = Vec::new();
    for Source { record, windows } in &sources {
        let id = &record.track_id;
        let src = layout.track_dir(id);
        let rel = format!("sequences/{id}");
        let dst = root.join(&rel);
        for (from, to) in [("rgb", "rgb"), ("mask", "mask"), ("features/kp", "kp")] {
            media::create_dir(&dst.join(to))?;
            let ext = if to == "kp" { "json" } else { "png" };
            for i in 0..record.len() {
                let name = frame_name(i, ext);
                std::fs::copy(src.join(from).join(&name), dst.join(to).join(&name))
                    .with_context(|| format!("copying {}/{from}/{name}", src.display()))?;
            }
        }
        let entries: Vec<CropEntry> = record
            .frames
            .iter()
            .zip(windows)
            .map(|(f, w)| CropEntry {
                frame: f.index,
                source_frame: f.source_frame,
                cx: w.cx,
                cy: w.cy,
                side: w.side,
                padded: w.padded,
            })
            .collect();
        media::write_json(&dst.join("crop_windows.json"), &entries)?;
        sequences.push(ManifestSequence {
            track_id: id.clone(),
            category: record.category.clone(),
            video_id: record.video_id.clone(),
            frames: record.len(),
            crop_size: record.crop_size,
            rgb: format!("{rel}/rgb"),
            masks: format!("{rel}/mask"),
            keypoints: format!("{rel}/kp"),
            crop_windows: format!("{rel}/crop_windows.json"),
        });
    }
    let manifest = BenchmarkManifest {
        version: MANIFEST_VERSION,
        skeleton: skeleton.clone(),
        categories: picked.keys().cloned().collect(),
        sequences,
    };
    manifest.save(&root.join(MANIFEST_FILE))?;
    let problems = manifest.problems(root);
    if !problems.is_empty() {
        bail!("exported benchmark does not validate:\n  {}", problems.join("\n  "));
    }
    let reread = BenchmarkManifest::load(&root.join(MANIFEST_FILE))?;
    if reread != manifest {
        bail!("manifest does not read back identically");
    }
    staged.commit()?;
    Ok(manifest)
}
