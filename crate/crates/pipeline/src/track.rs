//! Tracking stage: interval-wise detection and mask propagation, the filter
//! passes, temporal postprocessing and object-centric cropping.

use std::collections::BTreeMap;

use mf_backend::{BoxPrompt, CropHint, Gateway, Image, SourceHint};
use mf_core::{mask_iou, BBoxF64, Mask, RgbImage};
use serde::{Deserialize, Serialize};

use crate::config::{CropConfig, TrackConfig};
use crate::error::Result;

/// Random access to the frames of one clip, each tagged with its source.
pub trait FrameSource {
    fn len(&self) -> usize;
    fn dims(&self) -> (usize, usize);
    fn image(&self, index: usize) -> Result<Image>;
    /// Source-video identity of a clip frame, used for crop provenance.
    fn source(&self, index: usize) -> SourceHint;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Frames held in memory.
#[derive(Debug, Clone)]
pub struct MemoryFrames {
    pub video_id: String,
    pub frames: Vec<Image>,
}

impl MemoryFrames {
    pub fn new(video_id: &str, frames: Vec<RgbImage>) -> Self {
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                Image::new(f).with_source(SourceHint {
                    video_id: video_id.to_string(),
                    frame: i,
                    crop: None,
                })
            })
            .collect();
        Self {
            video_id: video_id.to_string(),
            frames,
        }
    }
}

impl FrameSource for MemoryFrames {
    fn len(&self) -> usize {
        self.frames.len()
    }

    fn dims(&self) -> (usize, usize) {
        self.frames.first().map_or((0, 0), Image::dims)
    }

    fn image(&self, index: usize) -> Result<Image> {
        Ok(self.frames[index].clone())
    }

    fn source(&self, index: usize) -> SourceHint {
        self.frames[index].source.clone().unwrap_or(SourceHint {
            video_id: self.video_id.clone(),
            frame: index,
            crop: None,
        })
    }
}

/// One instance on one clip frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: usize,
    pub bbox: BBoxF64,
    pub mask: Mask,
}

impl Detection {
    /// `None` for an empty mask.
    pub fn from_mask(frame: usize, mask: Mask) -> Option<Self> {
        let bbox = mask.bbox()?;
        Some(Self { frame, bbox, mask })
    }
}

/// Which pass changed a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    Overlap,
    LowRes,
    Truncated,
    Inconsistent,
    Refilled,
    GapSplit,
    MaxLenSplit,
    TooShort,
    ImageCheck,
    Padded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEvent {
    pub pass: Pass,
    /// Clip frame indices affected.
    pub frames: Vec<usize>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    /// Proposal id from tracking; split tracks share it.
    pub proposal: u32,
    /// Position among the pieces a proposal was split into.
    pub segment: u32,
    pub detections: Vec<Detection>,
    pub log: Vec<ProvenanceEvent>,
}

impl Track {
    pub fn new(proposal: u32) -> Self {
        Self {
            proposal,
            segment: 0,
            detections: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn frames(&self) -> Vec<usize> {
        self.detections.iter().map(|d| d.frame).collect()
    }

    /// Half-open range of clip frames spanned, if any.
    pub fn span(&self) -> Option<std::ops::Range<usize>> {
        Some(self.detections.first()?.frame..self.detections.last()?.frame + 1)
    }

    pub(crate) fn record(&mut self, pass: Pass, frames: Vec<usize>, detail: impl Into<String>) {
        if !frames.is_empty() {
            self.log.push(ProvenanceEvent {
                pass,
                frames,
                detail: detail.into(),
            });
        }
    }

    /// Drops detections failing `keep`, logging them under `pass`.
    fn retain(&mut self, pass: Pass, detail: &str, mut keep: impl FnMut(&Detection) -> bool) {
        let mut removed = Vec::new();
        self.detections.retain(|d| {
            let k = keep(d);
            if !k {
                removed.push(d.frame);
            }
            k
        });
        self.record(pass, removed, detail);
    }
}

/// Detects on the first frame of every interval, propagates masks through
/// the interval and links instances to existing tracks by greedy mask IoU.
pub fn iterative_track(src: &dyn FrameSource, gateway: &Gateway, prompt: &str, cfg: &TrackConfig) -> Result<Vec<Track>> {
    let n = src.len();
    let mut tracks: Vec<Track> = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + cfg.interval).min(n);
        let first = src.image(start)?;
        let detections = gateway.detect(first.clone(), prompt)?;
        if detections.is_empty() {
            start = end;
            continue;
        }
        let mut frames = vec![first];
        for k in start + 1..end {
            frames.push(src.image(k)?);
        }
        let prompts = detections
            .iter()
            .enumerate()
            .map(|(i, d)| BoxPrompt {
                instance_id: i as u32,
                frame: 0,
                bbox: d.bbox,
            })
            .collect();
        let instances = gateway.segment_track(frames, prompts)?;

        let proposals: Vec<Vec<Detection>> = instances
            .into_iter()
            .map(|inst| {
                inst.masks
                    .into_iter()
                    .enumerate()
                    .filter_map(|(k, m)| Detection::from_mask(start + k, m?))
                    .collect::<Vec<_>>()
            })
            .filter(|d: &Vec<Detection>| !d.is_empty())
            .collect();

        let mut pairs = Vec::new();
        for (i, p) in proposals.iter().enumerate() {
            for (t, track) in tracks.iter().enumerate() {
                let Some(last) = track.detections.last() else { continue };
                let iou: f64 = mask_iou(&p[0].mask, &last.mask)?;
                if iou >= cfg.association_floor {
                    pairs.push((iou, t, i));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut owner: Vec<Option<usize>> = vec![None; proposals.len()];
        let mut taken = vec![false; tracks.len()];
        for (_, t, i) in pairs {
            if owner[i].is_none() && !taken[t] {
                owner[i] = Some(t);
                taken[t] = true;
            }
        }
        for (i, dets) in proposals.into_iter().enumerate() {
            let t = match owner[i] {
                Some(t) => t,
                None => {
                    tracks.push(Track::new(tracks.len() as u32));
                    tracks.len() - 1
                }
            };
            tracks[t].detections.extend(dets);
        }
        start = end;
    }
    Ok(tracks)
}

/// Removes every frame on which two tracks' masks overlap with IoU above
/// `iou_thresh`, from both tracks.
pub fn filter_overlaps(tracks: &mut [Track], iou_thresh: f64) -> Result<()> {
    let mut by_frame: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (t, track) in tracks.iter().enumerate() {
        for (d, det) in track.detections.iter().enumerate() {
            by_frame.entry(det.frame).or_default().push((t, d));
        }
    }
    let mut doomed: Vec<Vec<usize>> = vec![Vec::new(); tracks.len()];
    for (frame, members) in by_frame {
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let (ta, da) = members[a];
                let (tb, db) = members[b];
                let iou: f64 = mask_iou(&tracks[ta].detections[da].mask, &tracks[tb].detections[db].mask)?;
                if iou > iou_thresh {
                    doomed[ta].push(frame);
                    doomed[tb].push(frame);
                }
            }
        }
    }
    for (track, mut frames) in tracks.iter_mut().zip(doomed) {
        frames.sort_unstable();
        frames.dedup();
        track.retain(Pass::Overlap, "", |d| frames.binary_search(&d.frame).is_err());
    }
    Ok(())
}

/// Drops frames whose box area is below a quarter of the crop area.
pub fn filter_low_res(track: &mut Track, crop_size: usize) {
    let min_area = (crop_size * crop_size) as f64 / 4.0;
    track.retain(Pass::LowRes, &format!("bbox area < {min_area}"), |d| d.bbox.area() >= min_area);
}

/// Whether any box edge lies closer than `margin_frac·min(w, h)` to the border.
pub fn is_truncated(bbox: &BBoxF64, (w, h): (usize, usize), margin_frac: f64) -> bool {
    let margin = margin_frac * w.min(h) as f64;
    let (w, h) = (w as f64, h as f64);
    bbox.x_min < margin || bbox.y_min < margin || w - bbox.x_max < margin || h - bbox.y_max < margin
}

pub fn filter_truncated(track: &mut Track, dims: (usize, usize), margin_frac: f64) {
    track.retain(Pass::Truncated, "", |d| !is_truncated(&d.bbox, dims, margin_frac));
}

/// Truncates the track at the first consecutive pair of detections whose
/// boxes overlap with IoU below `iou_thresh`.
pub fn cut_inconsistent(track: &mut Track, iou_thresh: f64) {
    let cut = (1..track.len()).find(|&i| track.detections[i - 1].bbox.iou(&track.detections[i].bbox) < iou_thresh);
    if let Some(i) = cut {
        let removed: Vec<usize> = track.detections[i..].iter().map(|d| d.frame).collect();
        let detail = format!(
            "bbox IoU {:.3} between frames {} and {}",
            track.detections[i - 1].bbox.iou(&track.detections[i].bbox),
            track.detections[i - 1].frame,
            track.detections[i].frame
        );
        track.detections.truncate(i);
        track.record(Pass::Inconsistent, removed, detail);
    }
}

/// Limits applied by [`temporal_postprocess`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalLimits {
    pub min_len: usize,
    pub max_len: usize,
    pub max_gap: usize,
}

impl From<&TrackConfig> for TemporalLimits {
    fn from(c: &TrackConfig) -> Self {
        Self {
            min_len: c.min_len,
            max_len: c.max_len,
            max_gap: c.max_gap,
        }
    }
}

/// Splits a track at long gaps and at `max_len`, refills short gaps with
/// masks segmented from boxes interpolated between the flanking detections,
/// and drops pieces shorter than `min_len`. Returns kept and dropped pieces.
///
/// `refill(frame, bbox)` returns the mask for a missing frame; an error or
/// `None` turns the gap into a split.
pub fn temporal_postprocess(
    track: Track,
    limits: TemporalLimits,
    mut refill: impl FnMut(usize, &BBoxF64) -> Result<Option<Mask>>,
) -> (Vec<Track>, Vec<Track>) {
    let mut pieces: Vec<Track> = Vec::new();
    let proposal = track.proposal;
    let mut cur = Track {
        detections: Vec::new(),
        ..track.clone()
    };
    let split = |cur: &mut Track, pieces: &mut Vec<Track>, pass: Pass, at: usize, detail: String| {
        let mut next = Track::new(proposal);
        next.log = cur.log.clone();
        next.record(pass, vec![at], detail);
        pieces.push(std::mem::replace(cur, next));
    };
    for det in track.detections {
        if let Some(prev) = cur.detections.last() {
            let gap = det.frame - prev.frame - 1;
            if gap > limits.max_gap {
                let detail = format!("gap of {gap} frames after frame {}", prev.frame);
                split(&mut cur, &mut pieces, Pass::GapSplit, det.frame, detail);
            } else if gap > 0 {
                let (a, b) = (prev.frame, det.frame);
                let (ba, bb) = (prev.bbox, det.bbox);
                let mut fills = Vec::new();
                for f in a + 1..b {
                    let t = (f - a) as f64 / (b - a) as f64;
                    let bbox = ba.lerp(&bb, t);
                    match refill(f, &bbox) {
                        Ok(Some(m)) => match Detection::from_mask(f, m) {
                            Some(d) => fills.push(d),
                            None => break,
                        },
                        Ok(None) => break,
                        Err(e) => {
                            log::warn!("resegmenting frame {f} failed: {e}");
                            break;
                        }
                    }
                }
                if fills.len() == gap {
                    cur.record(Pass::Refilled, (a + 1..b).collect(), "interpolated box prompt");
                    for d in fills {
                        if cur.len() == limits.max_len {
                            split(&mut cur, &mut pieces, Pass::MaxLenSplit, d.frame, String::new());
                        }
                        cur.detections.push(d);
                    }
                } else {
                    let detail = format!("gap of {gap} frames could not be resegmented");
                    split(&mut cur, &mut pieces, Pass::GapSplit, det.frame, detail);
                }
            }
        }
        if cur.len() == limits.max_len {
            split(&mut cur, &mut pieces, Pass::MaxLenSplit, det.frame, String::new());
        }
        cur.detections.push(det);
    }
    if !cur.is_empty() {
        pieces.push(cur);
    }
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for (i, mut p) in pieces.into_iter().enumerate() {
        p.segment = i as u32;
        if p.len() >= limits.min_len {
            kept.push(p);
        } else {
            let frames = p.frames();
            p.record(Pass::TooShort, frames, format!("{} < {} frames", p.len(), limits.min_len));
            dropped.push(p);
        }
    }
    (kept, dropped)
}

/// Square crop window on one frame, in source-frame pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropWindow {
    /// Clip frame index.
    pub frame_index: usize,
    pub cx: f64,
    pub cy: f64,
    pub side: f64,
    /// Values before temporal smoothing.
    pub raw_cx: f64,
    pub raw_cy: f64,
    pub raw_side: f64,
    /// Part of the window lies outside the frame and was filled with black.
    pub padded: bool,
}

impl CropWindow {
    pub fn x0(&self) -> f64 {
        self.cx - self.side / 2.0
    }

    pub fn y0(&self) -> f64 {
        self.cy - self.side / 2.0
    }

    pub fn hint(&self, size: usize) -> CropHint {
        CropHint {
            cx: self.cx,
            cy: self.cy,
            side: self.side,
            size,
        }
    }

    /// Frame point sampled by crop pixel `(u, v)` at output resolution `size`.
    pub fn sample_point(&self, u: usize, v: usize, size: usize) -> (f64, f64) {
        let k = self.side / size as f64;
        (self.x0() + (u as f64 + 0.5) * k, self.y0() + (v as f64 + 0.5) * k)
    }

    /// Frame coordinates to continuous crop coordinates.
    pub fn to_crop(&self, x: f64, y: f64, size: usize) -> (f64, f64) {
        let k = size as f64 / self.side;
        ((x - self.x0()) * k, (y - self.y0()) * k)
    }
}

/// Centered moving average over `window` samples, truncated at the ends:
/// entry `i` averages indices `i − window/2 ..= i + (window−1)/2`.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let back = window / 2;
    let fwd = window.saturating_sub(1) / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Crop windows centered on each box with side `sqrt(area_ratio·area)`,
/// centers and sides smoothed over time.
pub fn compute_crops(track: &Track, cfg: &CropConfig, frame_dims: (usize, usize)) -> Vec<CropWindow> {
    let raw: Vec<(f64, f64, f64)> = track
        .detections
        .iter()
        .map(|d| {
            let (cx, cy) = d.bbox.center();
            (cx, cy, (cfg.area_ratio * d.bbox.area()).sqrt())
        })
        .collect();
    let pick = |f: fn(&(f64, f64, f64)) -> f64| moving_average(&raw.iter().map(f).collect::<Vec<_>>(), cfg.smooth_window);
    let (cx, cy, side) = (pick(|r| r.0), pick(|r| r.1), pick(|r| r.2));
    let (w, h) = (frame_dims.0 as f64, frame_dims.1 as f64);
    track
        .detections
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let half = side[i] / 2.0;
            CropWindow {
                frame_index: d.frame,
                cx: cx[i],
                cy: cy[i],
                side: side[i],
                raw_cx: raw[i].0,
                raw_cy: raw[i].1,
                raw_side: raw[i].2,
                padded: cx[i] - half < 0.0 || cy[i] - half < 0.0 || cx[i] + half > w || cy[i] + half > h,
            }
        })
        .collect()
}

/// Bilinear resample of a window; samples outside the frame are black.
pub fn crop_rgb(frame: &RgbImage, win: &CropWindow, size: usize) -> RgbImage {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let px = |x: i64, y: i64| -> [f64; 3] {
        if x < 0 || y < 0 || x >= w || y >= h {
            [0.0; 3]
        } else {
            frame.get(x as usize, y as usize).map(f64::from)
        }
    };
    let mut out = RgbImage::new(size, size);
    for v in 0..size {
        for u in 0..size {
            let (x, y) = win.sample_point(u, v, size);
            if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
                continue;
            }
            let (fx, fy) = (x - 0.5, y - 0.5);
            let (x0, y0) = (fx.floor(), fy.floor());
            let (ax, ay) = (fx - x0, fy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let clamp_x = |x: i64| x.clamp(0, w - 1);
            let clamp_y = |y: i64| y.clamp(0, h - 1);
            let p00 = px(clamp_x(x0), clamp_y(y0));
            let p10 = px(clamp_x(x0 + 1), clamp_y(y0));
            let p01 = px(clamp_x(x0), clamp_y(y0 + 1));
            let p11 = px(clamp_x(x0 + 1), clamp_y(y0 + 1));
            let rgb = std::array::from_fn(|c| {
                let top = p00[c] * (1.0 - ax) + p10[c] * ax;
                let bottom = p01[c] * (1.0 - ax) + p11[c] * ax;
                (top * (1.0 - ay) + bottom * ay).round().clamp(0.0, 255.0) as u8
            });
            out.put(u, v, rgb);
        }
    }
    out
}

/// Nearest-neighbour resample of a window; outside the frame is background.
pub fn crop_mask(mask: &Mask, win: &CropWindow, size: usize) -> Mask {
    Mask::from_fn(size, size, |u, v| {
        let (x, y) = win.sample_point(u, v, size);
        x >= 0.0 && y >= 0.0 && mask.get_signed(x as i64, y as i64)
    })
}

/// Maps a crop-space mask back onto the full frame through its window.
pub fn uncrop_mask(crop: &Mask, win: &CropWindow, frame_dims: (usize, usize)) -> Mask {
    let size = crop.width();
    Mask::from_fn(frame_dims.0, frame_dims.1, |x, y| {
        let (u, v) = win.to_crop(x as f64 + 0.5, y as f64 + 0.5, size);
        u >= 0.0 && v >= 0.0 && crop.get_signed(u as i64, v as i64)
    })
}
