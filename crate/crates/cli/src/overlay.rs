//! Review overlays drawn on crop frames.

use mf_core::{KeypointsF64, Mask, RgbImage, Skeleton, CONFIDENCE_FLOOR};

pub const MASK_TINT: [u8; 3] = [255, 40, 40];
pub const MASK_ALPHA: f64 = 0.5;
const JOINT: [u8; 3] = [255, 230, 0];
const EDGE: [u8; 3] = [0, 200, 255];

/// Alpha-blends the tint over mask pixels; the rest is left as is.
pub fn masked(rgb: &RgbImage, mask: &Mask) -> RgbImage {
    let mut out = rgb.clone();
    for (x, y) in mask.pixels() {
        let p = rgb.get(x, y);
        let blended = std::array::from_fn(|c| ((1.0 - MASK_ALPHA) * p[c] as f64 + MASK_ALPHA * MASK_TINT[c] as f64).round() as u8);
        out.put(x, y, blended);
    }
    out
}

fn plot(img: &mut RgbImage, x: i64, y: i64, rgb: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
        img.put(x as usize, y as usize, rgb);
    }
}

fn line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), rgb: [u8; 3]) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        plot(img, (x0 + (x1 - x0) * t).floor() as i64, (y0 + (y1 - y0) * t).floor() as i64, rgb);
    }
}

/// Skeleton edges and joint dots for joints above the confidence floor.
pub fn keypoints(rgb: &RgbImage, kps: &KeypointsF64, skeleton: &Skeleton) -> RgbImage {
    let mut out = rgb.clone();
    let visible = |i: usize| kps.points.get(i).filter(|p| p.confidence >= CONFIDENCE_FLOOR);
    for [a, b] in &skeleton.edges {
        if let (Some(p), Some(q)) = (visible(*a), visible(*b)) {
            line(&mut out, (p.x, p.y), (q.x, q.y), EDGE);
        }
    }
    for i in 0..kps.len() {
        if let Some(p) = visible(i) {
            let (cx, cy) = (p.x.floor() as i64, p.y.floor() as i64);
            for dy in -2..=2i64 {
                for dx in -2..=2i64 {
                    if dx * dx + dy * dy <= 5 {
                        plot(&mut out, cx + dx, cy + dy, JOINT);
                    }
                }
            }
        }
    }
    out
}
