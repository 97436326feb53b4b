//! Per-item processing for each stage. A processor writes its outputs,
//! enqueues the follow-up items and reports the outcome; the worker loop
//! records it in the store.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use mf_backend::queries::{final_image_check, generate_queries};
use mf_backend::{Backend, Capability, Gateway, GatewayConfig, HttpBackend, Image, SourceHint};
use mf_core::{Mask, RgbImage, Skeleton};
use mf_store::{Kind, Metadata, Outcome, Stage, Store, WorkItem};
use serde_json::{json, Value};

use crate::config::{BackendConfig, Config};
use crate::error::{PipelineError, Result};
use crate::features;
use crate::media::{self, frame_name, Layout, StagedDir};
use crate::records::*;
use crate::shots::{sample_frames, semantic_score, split_and_filter};
use crate::track::*;
use crate::fnv1a;

/// Shared state for processing items.
pub struct Context {
    pub config: Config,
    pub layout: Layout,
    pub store: Arc<Store>,
    pub gateway: Arc<Gateway>,
    pub skeleton: Skeleton,
}

impl Context {
    pub fn new(config: Config, store: Arc<Store>, gateway: Arc<Gateway>) -> Self {
        Self {
            layout: Layout::new(&config.data_dir),
            config,
            store,
            gateway,
            skeleton: Skeleton::quadruped17(),
        }
    }
}

/// Routes every capability to the endpoint configured for it. The
/// endpoint `synthetic` selects `synthetic`; `none` leaves it unrouted.
pub fn build_gateway(cfg: &BackendConfig, synthetic: Option<Arc<dyn Backend>>) -> Result<Gateway> {
    let mut gw = Gateway::new(GatewayConfig {
        attempts: cfg.attempts,
        backoff: Duration::from_millis(cfg.backoff_ms),
        max_inflight: cfg.max_inflight,
    });
    let mut http: BTreeMap<String, Arc<dyn Backend>> = BTreeMap::new();
    for cap in Capability::ALL {
        let endpoint = cfg.endpoints.get(cap.as_str()).unwrap_or(&cfg.endpoint).trim();
        let backend: Arc<dyn Backend> = match endpoint {
            "none" | "" => continue,
            "synthetic" => synthetic.clone().ok_or_else(|| {
                PipelineError::Config(format!("{cap} is routed to the synthetic backend, which is not available here"))
            })?,
            url => http
                .entry(url.to_string())
                .or_insert_with(|| Arc::new(HttpBackend::new(url, Duration::from_secs_f64(cfg.timeout_secs))))
                .clone(),
        };
        gw = gw.route(cap, backend);
    }
    for key in cfg.endpoints.keys() {
        key.parse::<Capability>().map_err(PipelineError::Config)?;
    }
    Ok(gw)
}

/// Frames of a stored clip, loaded on demand.
pub struct ClipFrames {
    dir: PathBuf,
    clip: ClipRecord,
}

impl ClipFrames {
    pub fn new(dir: PathBuf, clip: ClipRecord) -> Self {
        Self { dir, clip }
    }

    pub fn rgb(&self, index: usize) -> Result<RgbImage> {
        media::read_rgb(&self.dir.join("frames").join(frame_name(index, "png")))
    }
}

impl FrameSource for ClipFrames {
    fn len(&self) -> usize {
        self.clip.frames.len()
    }

    fn dims(&self) -> (usize, usize) {
        (self.clip.width, self.clip.height)
    }

    fn image(&self, index: usize) -> Result<Image> {
        Ok(Image::new(self.rgb(index)?).with_source(self.source(index)))
    }

    fn source(&self, index: usize) -> SourceHint {
        SourceHint {
            video_id: self.clip.video_id.clone(),
            frame: self.clip.frames[index].source_index,
            crop: None,
        }
    }
}

fn meta(value: Value) -> Metadata {
    match value {
        Value::Object(m) => m,
        _ => Metadata::new(),
    }
}

fn category_of(item: &WorkItem) -> Result<String> {
    item.category()
        .map(str::to_string)
        .ok_or_else(|| PipelineError::Invalid(format!("{} {} has no category", item.stage, item.id)))
}

/// Generates search queries for `category`, searches, and enqueues one
/// collect item per new hit. Returns the ids enqueued.
pub fn seed_collect(ctx: &Context, category: &str) -> Result<Vec<String>> {
    let c = &ctx.config.collect;
    let queries = generate_queries(&ctx.gateway, category, c.n_breeds, c.n_contexts, c.seed)?;
    let mut added = Vec::new();
    for q in queries {
        for hit in ctx.gateway.search_videos(&q, c.per_query)? {
            let item = WorkItem::new(&hit.video_id, Kind::Video, Stage::Collect, "")
                .with_meta("category", category)
                .with_meta("query", q.as_str())
                .with_meta("title", hit.title.as_str());
            if ctx.store.enqueue_if_absent(&item)? {
                added.push(hit.video_id);
            }
        }
    }
    Ok(added)
}

/// Runs the processor for `item.stage`.
pub fn process(ctx: &Context, item: &WorkItem) -> Result<(Outcome, Metadata)> {
    match item.stage {
        Stage::Collect => collect(ctx, item),
        Stage::Preprocess => preprocess(ctx, item),
        Stage::Track => track(ctx, item),
        Stage::Feature => feature(ctx, item),
        Stage::Review => Err(PipelineError::Invalid(
            "review items are decided through the review service".into(),
        )),
    }
}

fn collect(ctx: &Context, item: &WorkItem) -> Result<(Outcome, Metadata)> {
    let category = category_of(item)?;
    let video = ctx.gateway.download_video(&item.id)?;
    let Some(first) = video.frames.first() else {
        return Ok((Outcome::Discarded, meta(json!({"reason": "video has no frames"}))));
    };
    let (width, height) = first.dims();
    let target = ctx.layout.video_dir(&item.id);
    let staged = StagedDir::new(&target)?;
    let frames_dir = staged.path().join("frames");
    media::create_dir(&frames_dir)?;
    for (i, f) in video.frames.iter().enumerate() {
        if f.dims() != (width, height) {
            return Ok((Outcome::Discarded, meta(json!({"reason": format!("frame {i} changes size")}))));
        }
        media::write_rgb(&frames_dir.join(frame_name(i, "png")), &f.pixels)?;
    }
    let record = VideoRecord {
        video_id: item.id.clone(),
        title: video.title.clone(),
        fps: video.fps,
        frames: video.frames.len(),
        width,
        height,
        category: category.clone(),
        query: item.metadata.get("query").and_then(Value::as_str).unwrap_or_default().to_string(),
    };
    media::write_json(&staged.path().join("video.json"), &record)?;
    staged.commit()?;
    let next = WorkItem::new(&item.id, Kind::Video, Stage::Preprocess, rel(&ctx.layout, &target))
        .with_meta("category", category.as_str())
        .with_meta("title", record.title.as_str())
        .with_meta("query", record.query.as_str());
    ctx.store.enqueue_if_absent(&next)?;
    Ok((
        Outcome::Completed,
        meta(json!({"frames": record.frames, "fps": record.fps, "title": record.title})),
    ))
}

fn rel(layout: &Layout, path: &Path) -> String {
    path.strip_prefix(layout.root()).unwrap_or(path).display().to_string()
}

fn preprocess(ctx: &Context, item: &WorkItem) -> Result<(Outcome, Metadata)> {
    let dir = ctx.layout.video_dir(&item.id);
    let video: VideoRecord = media::read_json(&dir.join("video.json"))?;
    let frames = (0..video.frames)
        .map(|i| media::read_rgb(&dir.join("frames").join(frame_name(i, "png"))))
        .collect::<Result<Vec<_>>>()?;
    let cfg = &ctx.config;
    let split = split_and_filter(&frames, video.fps, &cfg.shot)?;
    let mut rejected: Vec<Value> = split.rejected.iter().map(|r| json!(r)).collect();
    let mut clips = Vec::new();
    for plan in &split.clips {
        let shot_no = split.cuts.iter().filter(|&&c| c <= plan.shot.start).count();
        let clip_id = format!("{}_c{:02}", video.video_id, shot_no);
        let seed = cfg.semantic.seed ^ fnv1a(&clip_id);
        let picked = sample_frames(plan.frames.len(), cfg.semantic.n_samples, seed);
        let images = picked
            .iter()
            .map(|&k| {
                let src = plan.frames[k].source_index;
                Image::new(frames[src].clone()).with_source(SourceHint {
                    video_id: video.video_id.clone(),
                    frame: src,
                    crop: None,
                })
            })
            .collect();
        let score = semantic_score(&ctx.gateway, &video.category, images, cfg.semantic.weight)?;
        if score < cfg.semantic.threshold {
            rejected.push(json!({"reason": "semantic", "clip_id": clip_id, "score": score}));
            continue;
        }
        let record = ClipRecord {
            clip_id: clip_id.clone(),
            video_id: video.video_id.clone(),
            category: video.category.clone(),
            fps: cfg.shot.target_fps.min(video.fps),
            width: video.width,
            height: video.height,
            shot: plan.shot.clone(),
            frames: plan.frames.clone(),
            semantic_score: score,
            semantic_frames: picked,
            semantic_seed: seed,
        };
        let target = ctx.layout.clip_dir(&clip_id);
        let staged = StagedDir::new(&target)?;
        let out = staged.path().join("frames");
        media::create_dir(&out)?;
        for f in &record.frames {
            media::link_or_copy(
                &dir.join("frames").join(frame_name(f.source_index, "png")),
                &out.join(frame_name(f.index, "png")),
            )?;
        }
        media::write_json(&staged.path().join("clip.json"), &record)?;
        staged.commit()?;
        let next = WorkItem::new(&clip_id, Kind::Clip, Stage::Track, rel(&ctx.layout, &target))
            .with_meta("category", video.category.as_str())
            .with_meta("video_id", video.video_id.as_str())
            .with_meta("frames", record.frames.len())
            .with_meta("semantic_score", score);
        ctx.store.enqueue_if_absent(&next)?;
        clips.push(clip_id);
    }
    let outcome = if clips.is_empty() {
        Outcome::Discarded
    } else {
        Outcome::Completed
    };
    Ok((
        outcome,
        meta(json!({"cuts": split.cuts, "clips": clips, "rejected": rejected})),
    ))
}

/// Runs tracking, every filter pass and cropping on a clip and writes the
/// surviving tracks. Returns the clip's tracking report.
pub fn track_clip(ctx: &Context, clip: &ClipRecord) -> Result<(TrackingReport, Vec<TrackRecord>)> {
    let cfg = &ctx.config;
    let gw = &ctx.gateway;
    let src = ClipFrames::new(ctx.layout.clip_dir(&clip.clip_id), clip.clone());
    let prompt = cfg.track.prompt_template.replace("{category}", &clip.category);
    let mut tracks = iterative_track(&src, gw, &prompt, &cfg.track)?;
    let proposals = tracks.len();
    filter_overlaps(&mut tracks, cfg.track.overlap_iou)?;
    let dims = (clip.width, clip.height);
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for mut t in tracks {
        filter_low_res(&mut t, cfg.crop.size);
        filter_truncated(&mut t, dims, cfg.track.margin_frac);
        cut_inconsistent(&mut t, cfg.track.inconsistency_iou);
        if t.is_empty() {
            dropped.push(t);
            continue;
        }
        let (k, d) = temporal_postprocess(t, (&cfg.track).into(), |f, bbox| {
            let masks = gw.segment_frame(src.image(f)?, &[(0, *bbox)])?;
            Ok(masks.into_iter().next().and_then(|(_, m)| m))
        });
        kept.extend(k);
        dropped.extend(d);
    }
    kept.sort_by_key(|t| (t.detections[0].frame, t.proposal, t.segment));

    let mut records = Vec::new();
    let mut kept_ids = Vec::new();
    for (k, mut t) in kept.into_iter().enumerate() {
        let track_id = format!("{}_t{:02}", clip.clip_id, k);
        let windows = compute_crops(&t, &cfg.crop, dims);
        if cfg.track.image_check {
            let pick = sample_frames(t.len(), 1, cfg.track.seed ^ fnv1a(&track_id))[0];
            let win = &windows[pick];
            let mut hint = src.source(win.frame_index);
            hint.crop = Some(win.hint(cfg.crop.size));
            let img = Image::new(crop_rgb(&src.rgb(win.frame_index)?, win, cfg.crop.size)).with_source(hint);
            let check = final_image_check(gw, img, &clip.category)?;
            if !check.accept {
                let frames = t.frames();
                t.record(Pass::ImageCheck, frames, format!("answer {:?}", check.answer));
                dropped.push(t);
                continue;
            }
        }
        let padded: Vec<usize> = windows.iter().filter(|w| w.padded).map(|w| w.frame_index).collect();
        t.record(Pass::Padded, padded, "crop window extends past the frame");
        records.push(write_track(ctx, clip, &src, &t, &windows, &track_id)?);
        kept_ids.push(track_id);
    }
    let report = TrackingReport {
        clip_id: clip.clip_id.clone(),
        proposals,
        kept: kept_ids,
        dropped: dropped
            .into_iter()
            .map(|t| DroppedTrack {
                proposal: t.proposal,
                segment: t.segment,
                clip_frames: t.frames(),
                events: t.log,
            })
            .collect(),
    };
    media::write_json(&ctx.layout.clip_dir(&clip.clip_id).join("tracking.json"), &report)?;
    Ok((report, records))
}

fn write_track(
    ctx: &Context,
    clip: &ClipRecord,
    src: &ClipFrames,
    track: &Track,
    windows: &[CropWindow],
    track_id: &str,
) -> Result<TrackRecord> {
    let size = ctx.config.crop.size;
    let staged = StagedDir::new(ctx.layout.track_dir(track_id))?;
    let root = staged.path();
    media::create_dir(&root.join("rgb"))?;
    media::create_dir(&root.join("mask"))?;
    let mut frames = Vec::new();
    for (i, (det, win)) in track.detections.iter().zip(windows).enumerate() {
        let rgb = crop_rgb(&src.rgb(det.frame)?, win, size);
        media::write_rgb(&root.join("rgb").join(frame_name(i, "png")), &rgb)?;
        media::write_mask(&root.join("mask").join(frame_name(i, "png")), &crop_mask(&det.mask, win, size))?;
        frames.push(TrackFrame {
            index: i,
            clip_frame: det.frame,
            source_frame: clip.frames[det.frame].source_index,
            bbox: det.bbox,
        });
    }
    let record = TrackRecord {
        track_id: track_id.to_string(),
        clip_id: clip.clip_id.clone(),
        video_id: clip.video_id.clone(),
        category: clip.category.clone(),
        crop_size: size,
        frame_width: clip.width,
        frame_height: clip.height,
        frames,
    };
    let provenance = Provenance {
        track_id: track_id.to_string(),
        clip_id: clip.clip_id.clone(),
        proposal: track.proposal,
        segment: track.segment,
        events: track.log.clone(),
    };
    media::write_json(&root.join("track.json"), &record)?;
    media::write_json(&root.join("crop_windows.json"), windows)?;
    media::write_json(&root.join("provenance.json"), &provenance)?;
    staged.commit()?;
    Ok(record)
}

fn track(ctx: &Context, item: &WorkItem) -> Result<(Outcome, Metadata)> {
    let clip: ClipRecord = media::read_json(&ctx.layout.clip_dir(&item.id).join("clip.json"))?;
    let (report, records) = track_clip(ctx, &clip)?;
    for r in &records {
        let next = WorkItem::new(&r.track_id, Kind::Track, Stage::Feature, rel(&ctx.layout, &ctx.layout.track_dir(&r.track_id)))
            .with_meta("category", r.category.as_str())
            .with_meta("clip_id", r.clip_id.as_str())
            .with_meta("video_id", r.video_id.as_str())
            .with_meta("frames", r.len());
        ctx.store.enqueue_if_absent(&next)?;
    }
    let outcome = if records.is_empty() {
        Outcome::Discarded
    } else {
        Outcome::Completed
    };
    Ok((
        outcome,
        meta(json!({"proposals": report.proposals, "tracks": report.kept, "dropped": report.dropped.len()})),
    ))
}

/// Loads a track's crops, tagged with their source windows, and masks.
pub fn load_track_media(ctx: &Context, track_id: &str) -> Result<(TrackRecord, Vec<Image>, Vec<Mask>)> {
    let dir = ctx.layout.track_dir(track_id);
    let record: TrackRecord = media::read_json(&dir.join("track.json"))?;
    let windows: Vec<CropWindow> = media::read_json(&dir.join("crop_windows.json"))?;
    if windows.len() != record.len() {
        return Err(PipelineError::media(&dir, "crop windows do not match the track length"));
    }
    let mut images = Vec::new();
    let mut masks = Vec::new();
    for (f, w) in record.frames.iter().zip(&windows) {
        let rgb = media::read_rgb(&dir.join("rgb").join(frame_name(f.index, "png")))?;
        images.push(Image::new(rgb).with_source(SourceHint {
            video_id: record.video_id.clone(),
            frame: f.source_frame,
            crop: Some(w.hint(record.crop_size)),
        }));
        masks.push(media::read_mask(&dir.join("mask").join(frame_name(f.index, "png")))?);
    }
    Ok((record, images, masks))
}

fn feature(ctx: &Context, item: &WorkItem) -> Result<(Outcome, Metadata)> {
    let (record, images, masks) = load_track_media(ctx, &item.id)?;
    let set = features::extract_features(&ctx.gateway, &images, &masks, &ctx.skeleton, &ctx.config.feature)?;
    features::persist(&ctx.layout.track_dir(&item.id), &set, &ctx.config.feature)?;
    let s = &set.summary;
    let summary = json!({
        "category": record.category,
        "clip_id": record.clip_id,
        "frames": s.frames,
        "mean_occlusion": s.mean_occlusion,
        "mean_flow": s.mean_flow,
        "roughness": s.roughness,
    });
    let mut next = WorkItem::new(&item.id, Kind::Track, Stage::Review, item.payload_path.as_str());
    next.metadata = meta(summary.clone());
    ctx.store.enqueue_if_absent(&next)?;
    Ok((Outcome::Completed, meta(summary)))
}
