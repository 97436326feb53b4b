//! Brute-force reference implementations.
//!
//! Deliberately naive and written without reusing the optimized paths, so
//! tests can compare the two. Compiled for unit tests and with the `oracle`
//! feature.

use crate::grid::Grid;
use crate::keypoints::Keypoints;
use crate::mask::Mask;

pub fn iou(a: &Mask, b: &Mask) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (p, q) = (a.get(x, y), b.get(x, y));
            if p && q {
                inter += 1;
            }
            if p || q {
                union += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn pck(pred: &[(f64, f64)], gt: &Keypoints<f64>, area: f64, alpha: f64) -> Option<f64> {
    if area <= 0.0 {
        return None;
    }
    let mut ok = 0.0;
    let mut n = 0.0;
    for (j, g) in gt.points.iter().enumerate() {
        if g.confidence < 0.3 {
            continue;
        }
        n += 1.0;
        let dx = pred[j].0 - g.x;
        let dy = pred[j].1 - g.y;
        if (dx * dx + dy * dy).sqrt() <= alpha * area.sqrt() {
            ok += 1.0;
        }
    }
    if n == 0.0 {
        None
    } else {
        Some(ok / n)
    }
}

pub fn keypoint_transfer(
    src_gt: &Keypoints<f64>,
    src_v: &[[f64; 2]],
    tgt_gt: &Keypoints<f64>,
    tgt_v: &[[f64; 2]],
    tgt_area: f64,
    alpha: f64,
) -> Option<f64> {
    if tgt_area <= 0.0 {
        return None;
    }
    let mut ok = 0.0;
    let mut n = 0.0;
    for j in 0..src_gt.len() {
        let s = src_gt.points[j];
        let t = tgt_gt.points[j];
        if s.confidence < 0.3 || t.confidence < 0.3 {
            continue;
        }
        let mut best = 0;
        for v in 1..src_v.len() {
            let d = |i: usize| (src_v[i][0] - s.x).powi(2) + (src_v[i][1] - s.y).powi(2);
            if d(v) < d(best) {
                best = v;
            }
        }
        n += 1.0;
        let dist = ((tgt_v[best][0] - t.x).powi(2) + (tgt_v[best][1] - t.y).powi(2)).sqrt();
        if dist <= alpha * tgt_area.sqrt() {
            ok += 1.0;
        }
    }
    if n == 0.0 {
        None
    } else {
        Some(ok / n)
    }
}

pub fn mpjve(pred: &[Keypoints<f64>], gt: &[Keypoints<f64>], norm: f64) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for t in 0..gt.len() - 1 {
        for j in 0..gt[t].len() {
            let gvx = (gt[t + 1].points[j].x - gt[t].points[j].x) / norm;
            let gvy = (gt[t + 1].points[j].y - gt[t].points[j].y) / norm;
            let pvx = (pred[t + 1].points[j].x - pred[t].points[j].x) / norm;
            let pvy = (pred[t + 1].points[j].y - pred[t].points[j].y) / norm;
            total += ((gvx - pvx).powi(2) + (gvy - pvy).powi(2)).sqrt();
            count += 1.0;
        }
    }
    total / count
}

pub fn keypoint_sq_error(pred: &Keypoints<f64>, gt: &Keypoints<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..gt.len() {
        s += (pred.points[j].x - gt.points[j].x).powi(2);
        s += (pred.points[j].y - gt.points[j].y).powi(2);
    }
    s
}

pub fn roughness(seq: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for t in 0..seq.len().saturating_sub(1) {
        for i in 0..seq[t].len() {
            s += (seq[t + 1][i] - seq[t][i]).powi(2);
        }
    }
    for t in 0..seq.len().saturating_sub(2) {
        for i in 0..seq[t].len() {
            let second = seq[t + 2][i] - 2.0 * seq[t + 1][i] + seq[t][i];
            s += second * second;
        }
    }
    s
}

fn cell(m: &Mask, x: i64, y: i64) -> bool {
    x >= 0 && y >= 0 && (x as usize) < m.width() && (y as usize) < m.height() && m.get(x as usize, y as usize)
}

fn square_morph(m: &Mask, r: i64, dilate: bool) -> Mask {
    Mask::from_fn(m.width(), m.height(), |x, y| {
        let (x, y) = (x as i64, y as i64);
        let mut hits = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                hits += cell(m, x + dx, y + dy) as i64;
            }
        }
        if dilate {
            hits > 0
        } else {
            hits == (2 * r + 1) * (2 * r + 1)
        }
    })
}

fn edge_cells(m: &Mask) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..m.height() {
        for x in 0..m.width() {
            let (xi, yi) = (x as i64, y as i64);
            if m.get(x, y)
                && (!cell(m, xi - 1, yi) || !cell(m, xi + 1, yi) || !cell(m, xi, yi - 1) || !cell(m, xi, yi + 1))
            {
                out.push((x, y));
            }
        }
    }
    out
}

fn closest(set: &[(usize, usize)], p: (usize, usize)) -> Option<(usize, usize)> {
    let mut best: Option<((i64, usize, usize), (usize, usize))> = None;
    for &q in set {
        let d = (q.0 as i64 - p.0 as i64).pow(2) + (q.1 as i64 - p.1 as i64).pow(2);
        let key = (d, q.1, q.0);
        if best.map_or(true, |(k, _)| key < k) {
            best = Some((key, q));
        }
    }
    best.map(|(_, q)| q)
}

/// Per boundary pixel `(x, y, delta)` in row-major order.
pub fn occlusion_deltas(mask: &Mask, depth: &Grid<f64>, radius: usize) -> Vec<(usize, usize, f64)> {
    let r = radius as i64;
    let outer = edge_cells(&square_morph(mask, r, true));
    let inner = edge_cells(&square_morph(mask, r, false));
    edge_cells(mask)
        .into_iter()
        .map(|p| {
            let o = closest(&outer, p).unwrap_or(p);
            let i = closest(&inner, p).unwrap_or(p);
            (p.0, p.1, depth.at(o.0, o.1, 0) - depth.at(i.0, i.1, 0))
        })
        .collect()
}
