use anyhow::{ensure, Context as _};
use mf_core::{mask_iou, Grid, Mask, RgbImage};
use mf_pipeline::config::{CropConfig, ShotConfig};
use mf_pipeline::shots::{detect_shots, split_and_filter, Rejection};
use mf_pipeline::track::{compute_crops, crop_mask, uncrop_mask, Detection, Track};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle;
use crate::Outcome;

const PALETTE: [[u8; 3]; 4] = [[220, 40, 40], [30, 30, 110], [240, 240, 60], [20, 110, 20]];

/// A flat frame with a white block that slides with `t`.
fn frame(color: [u8; 3], t: usize) -> RgbImage {
    let mut img = RgbImage::filled(32, 24, color);
    for y in 8..14 {
        for x in 0..6 {
            img.put((x + t) % 32, y, [255, 255, 255]);
        }
    }
    img
}

fn shot(color: usize, len: usize) -> Vec<RgbImage> {
    (0..len).map(|t| frame(PALETTE[color], t)).collect()
}

pub fn shot_detection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 0..200 {
        let shots = rng.random_range(1..=4);
        let mut video = Vec::new();
        let mut cuts = Vec::new();
        let mut color = rng.random_range(0..PALETTE.len());
        for s in 0..shots {
            if s > 0 {
                cuts.push(video.len());
                color = (color + rng.random_range(1..PALETTE.len())) % PALETTE.len();
            }
            video.extend(shot(color, rng.random_range(2..50)));
        }
        let got = detect_shots(&video, 25.0)?;
        ensure!(got == cuts, "video {n}: cuts {got:?}, constructed {cuts:?}");
    }

    let cfg = ShotConfig::default();
    ensure!(cfg.min_len == 30 && cfg.target_fps == 10.0);
    let r = split_and_filter(&shot(0, 29), 10.0, &cfg)?;
    ensure!(r.clips.is_empty(), "29-frame clip kept");
    ensure!(matches!(r.rejected.as_slice(), [Rejection::TooShort { frames: 29, .. }]), "{:?}", r.rejected);
    let r = split_and_filter(&shot(0, 30), 10.0, &cfg)?;
    ensure!(r.clips.len() == 1 && r.clips[0].frames.len() == 30, "30-frame clip dropped");

    let mut video = shot(0, 29);
    video.extend(shot(1, 30));
    video.extend(vec![frame(PALETTE[2], 0); 40]);
    let r = split_and_filter(&video, 10.0, &cfg)?;
    ensure!(r.cuts == [29, 59], "cuts {:?}", r.cuts);
    let kept: Vec<_> = r.clips.iter().map(|c| c.shot.clone()).collect();
    ensure!(kept == [29..59], "kept {kept:?}");
    ensure!(
        matches!(r.rejected.as_slice(), [Rejection::TooShort { shot, frames: 29 }, Rejection::Still { shot: still }]
            if *shot == (0..29) && *still == (59..99)),
        "{:?}",
        r.rejected
    );
    Ok(())
}

fn ellipse(w: usize, h: usize, cx: f64, cy: f64, rx: f64, ry: f64) -> Mask {
    Mask::from_fn(w, h, |x, y| ((x as f64 + 0.5 - cx) / rx).powi(2) + ((y as f64 + 0.5 - cy) / ry).powi(2) < 1.0)
}

fn track_of(masks: Vec<Mask>) -> Track {
    let mut t = Track::new(0);
    t.detections = masks.into_iter().enumerate().map(|(f, m)| Detection::from_mask(f, m).unwrap()).collect();
    t
}

/// Centre of the pixel extent of a non-empty mask.
fn extent_center(m: &Mask) -> (f64, f64) {
    let px: Vec<(usize, usize)> = m.pixels().collect();
    let lo_x = px.iter().map(|p| p.0).min().unwrap() as f64;
    let hi_x = px.iter().map(|p| p.0).max().unwrap() as f64 + 1.0;
    let lo_y = px.iter().map(|p| p.1).min().unwrap() as f64;
    let hi_y = px.iter().map(|p| p.1).max().unwrap() as f64 + 1.0;
    ((lo_x + hi_x) / 2.0, (lo_y + hi_y) / 2.0)
}

pub fn crop_geometry() -> Outcome {
    let (w, h) = (480, 360);
    let cfg = CropConfig::default();
    ensure!(cfg.smooth_window == 10 && cfg.area_ratio == 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);

    for n in 0..20 {
        let frames = rng.random_range(1..40);
        let (mut cx, mut cy) = (rng.random_range(120.0..360.0), rng.random_range(100.0..260.0));
        let masks: Vec<Mask> = (0..frames)
            .map(|_| {
                cx += rng.random_range(-6.0..6.0);
                cy += rng.random_range(-4.0..4.0);
                ellipse(w, h, cx, cy, rng.random_range(20.0..80.0), rng.random_range(15.0..60.0))
            })
            .collect();
        let wins = compute_crops(&track_of(masks.clone()), &cfg, (w, h));
        let mut raw = (Vec::new(), Vec::new(), Vec::new());
        for (m, win) in masks.iter().zip(&wins) {
            let side = (2.0 * oracle::extent_area(m)).sqrt();
            ensure!((win.raw_side - side).abs() <= 0.5, "track {n}: side {} vs {side}", win.raw_side);
            let c = extent_center(m);
            raw.0.push(c.0);
            raw.1.push(c.1);
            raw.2.push(side);
        }
        let (sx, sy, ss) = (oracle::moving_mean(&raw.0, 10), oracle::moving_mean(&raw.1, 10), oracle::moving_mean(&raw.2, 10));
        for (i, win) in wins.iter().enumerate() {
            ensure!(
                (win.cx - sx[i]).abs() < 1e-9 && (win.cy - sy[i]).abs() < 1e-9 && (win.side - ss[i]).abs() < 1e-9,
                "track {n} frame {i}: smoothed window ({}, {}, {}) vs ({}, {}, {})",
                win.cx,
                win.cy,
                win.side,
                sx[i],
                sy[i],
                ss[i]
            );
        }
    }

    let mut worst: f64 = 1.0;
    for _ in 0..100 {
        let rx: f64 = rng.random_range(30.0..90.0);
        // a square of twice the box area holds the box only up to aspect 2
        let ry = rng.random_range((rx / 2.0).max(25.0)..(rx * 2.0).min(70.0));
        let cx = rng.random_range(rx + 10.0..w as f64 - rx - 10.0);
        let cy = rng.random_range(ry + 10.0..h as f64 - ry - 10.0);
        let m = ellipse(w, h, cx, cy, rx, ry);
        let size = [128, 256, 512][rng.random_range(0..3)];
        let win = compute_crops(&track_of(vec![m.clone()]), &CropConfig { size, ..cfg.clone() }, (w, h))[0];
        let back = uncrop_mask(&crop_mask(&m, &win, size), &win, (w, h));
        worst = worst.min(mask_iou(&m, &back)?);
    }
    ensure!(worst >= 0.98, "worst crop round-trip IoU {worst}");
    Ok(())
}

fn disc(n: usize, cx: f64, cy: f64, r: f64) -> Mask {
    Mask::from_fn(n, n, |x, y| (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2) <= r * r)
}

fn agree(mask: &Mask, depth: &Grid<f64>, radius: usize, tau: f64) -> anyhow::Result<f64> {
    let occ = mf_core::occlusion_boundary(mask, depth, radius, tau)?;
    let want = oracle::occlusion(mask, depth, radius);
    ensure!(occ.boundary_pixels.len() == want.len(), "{} boundary pixels vs {}", occ.boundary_pixels.len(), want.len());
    for (p, (x, y, d)) in occ.boundary_pixels.iter().zip(&want) {
        ensure!((p.x, p.y) == (*x, *y) && p.delta == *d, "pixel ({}, {}) delta {} vs ({x}, {y}) {d}", p.x, p.y, p.delta);
        ensure!(p.occluded == (*d > tau));
    }
    Ok(occ.fraction())
}

pub fn occlusion_boundary() -> Outcome {
    let (n, cx, cy, r) = (64usize, 32.0, 32.0, 16.0);
    let mask = disc(n, cx, cy, r);
    // nearer than the animal left of cx - r/2, which borders a third of the circle
    let depth = Grid::from_fn(n, n, 1, |x, y, _| {
        if mask.get(x, y) {
            0.5
        } else if (x as f64 + 0.5) < cx - r / 2.0 {
            0.9
        } else {
            0.2
        }
    });
    let frac = agree(&mask, &depth, 3, 0.05).context("one-third occluder")?;
    ensure!((frac - 1.0 / 3.0).abs() <= 0.05, "occluded fraction {frac}");

    let mut rng = ChaCha8Rng::seed_from_u64(64);
    for i in 0..30 {
        let r = rng.random_range(3.0..28.0);
        let mask = disc(n, rng.random_range(0.0..64.0), rng.random_range(0.0..64.0), r);
        let depth = Grid::from_fn(n, n, 1, |_, _, _| rng.random_range(0.0..1.0));
        agree(&mask, &depth, 3, 0.05).with_context(|| format!("random grid {i}"))?;
    }
    Ok(())
}
