//! Brute-force reference implementations, written from the definitions with
//! no shared code paths.

use mf_core::{Grid, Keypoints, Mask};

pub fn iou(a: &Mask, b: &Mask) -> f64 {
    let (w, h) = a.dims();
    let cells = (0..h).flat_map(|y| (0..w).map(move |x| (x, y)));
    let (mut both, mut either) = (0usize, 0usize);
    for (x, y) in cells {
        match (a.get(x, y), b.get(x, y)) {
            (true, true) => {
                both += 1;
                either += 1;
            }
            (true, false) | (false, true) => either += 1,
            _ => {}
        }
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

fn valid(c: f64) -> bool {
    c >= 0.3
}

/// PCK over joints that have both a candidate and a confident ground truth.
fn pck_from(cands: &[Option<(f64, f64)>], gt: &Keypoints<f64>, area: f64, alpha: f64) -> Option<f64> {
    if area <= 0.0 {
        return None;
    }
    let judged: Vec<bool> = cands
        .iter()
        .zip(&gt.points)
        .filter(|(c, g)| c.is_some() && valid(g.confidence))
        .map(|(c, g)| {
            let (x, y) = c.unwrap();
            let d2 = (x - g.x) * (x - g.x) + (y - g.y) * (y - g.y);
            d2.sqrt() <= alpha * area.sqrt()
        })
        .collect();
    if judged.is_empty() {
        None
    } else {
        Some(judged.iter().filter(|&&ok| ok).count() as f64 / judged.len() as f64)
    }
}

pub fn pck(pred: &Keypoints<f64>, gt: &Keypoints<f64>, area: f64, alpha: f64) -> Option<f64> {
    let cands: Vec<_> = pred.points.iter().map(|p| Some((p.x, p.y))).collect();
    pck_from(&cands, gt, area, alpha)
}

pub fn keypoint_transfer(
    src: (&Keypoints<f64>, &[[f64; 2]]),
    tgt: (&Keypoints<f64>, &[[f64; 2]], f64),
    alpha: f64,
) -> Option<f64> {
    if src.1.is_empty() {
        return None;
    }
    let cands: Vec<Option<(f64, f64)>> = src
        .0
        .points
        .iter()
        .map(|k| {
            if !valid(k.confidence) {
                return None;
            }
            let dists: Vec<f64> = src.1.iter().map(|v| (v[0] - k.x).powi(2) + (v[1] - k.y).powi(2)).collect();
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let idx = dists.iter().position(|&d| d == min).unwrap();
            Some((tgt.1[idx][0], tgt.1[idx][1]))
        })
        .collect();
    pck_from(&cands, tgt.0, tgt.2, alpha)
}

pub fn mpjve(pred: &[Keypoints<f64>], gt: &[Keypoints<f64>], norm: f64) -> f64 {
    let mut errors = Vec::new();
    for t in 1..gt.len() {
        for j in 0..gt[t].len() {
            let vg = ((gt[t].points[j].x - gt[t - 1].points[j].x) / norm, (gt[t].points[j].y - gt[t - 1].points[j].y) / norm);
            let vp = (
                (pred[t].points[j].x - pred[t - 1].points[j].x) / norm,
                (pred[t].points[j].y - pred[t - 1].points[j].y) / norm,
            );
            errors.push(((vg.0 - vp.0).powi(2) + (vg.1 - vp.1).powi(2)).sqrt());
        }
    }
    errors.iter().sum::<f64>() / errors.len() as f64
}

pub fn keypoint_sq_error(pred: &Keypoints<f64>, gt: &Keypoints<f64>) -> f64 {
    pred.points.iter().zip(&gt.points).map(|(p, g)| (p.x - g.x).powi(2) + (p.y - g.y).powi(2)).sum()
}

pub fn roughness(seq: &[Vec<f64>]) -> f64 {
    let n = seq.len();
    let mut total = 0.0;
    for t in 0..n {
        for i in 0..seq[t].len() {
            if t + 1 < n {
                total += (seq[t + 1][i] - seq[t][i]).powi(2);
            }
            if t + 2 < n {
                total += (seq[t + 2][i] - 2.0 * seq[t + 1][i] + seq[t][i]).powi(2);
            }
        }
    }
    total
}

fn at(m: &Mask, x: i64, y: i64) -> bool {
    x >= 0 && y >= 0 && (x as usize) < m.width() && (y as usize) < m.height() && m.get(x as usize, y as usize)
}

fn morph(m: &Mask, r: i64, grow: bool) -> Mask {
    Mask::from_fn(m.width(), m.height(), |x, y| {
        let window = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)));
        let mut vals = window.map(|(dx, dy)| at(m, x as i64 + dx, y as i64 + dy));
        if grow {
            vals.any(|v| v)
        } else {
            vals.all(|v| v)
        }
    })
}

fn edge(m: &Mask) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..m.height() as i64 {
        for x in 0..m.width() as i64 {
            let inside = at(m, x, y);
            let exposed = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| !at(m, x + dx, y + dy));
            if inside && exposed {
                out.push((x as usize, y as usize));
            }
        }
    }
    out
}

fn nearest(set: &[(usize, usize)], p: (usize, usize)) -> (usize, usize) {
    set.iter()
        .copied()
        .min_by_key(|q| {
            let dx = q.0 as i64 - p.0 as i64;
            let dy = q.1 as i64 - p.1 as i64;
            (dx * dx + dy * dy, q.1, q.0)
        })
        .unwrap_or(p)
}

/// `(x, y, outside depth − inside depth)` for each silhouette boundary pixel.
pub fn occlusion(mask: &Mask, depth: &Grid<f64>, radius: usize) -> Vec<(usize, usize, f64)> {
    let r = radius as i64;
    let outer = edge(&morph(mask, r, true));
    let inner = edge(&morph(mask, r, false));
    edge(mask)
        .into_iter()
        .map(|p| {
            let o = nearest(&outer, p);
            let i = nearest(&inner, p);
            (p.0, p.1, depth.at(o.0, o.1, 0) - depth.at(i.0, i.1, 0))
        })
        .collect()
}

/// Centered mean over indices `i - w/2 ..= i + (w - 1)/2` that exist.
pub fn moving_mean(v: &[f64], w: usize) -> Vec<f64> {
    let n = v.len() as i64;
    (0..n)
        .map(|i| {
            let lo = i - w as i64 / 2;
            let hi = i + (w as i64 - 1) / 2;
            let mut sum = 0.0;
            let mut count = 0.0;
            for j in lo..=hi {
                if (0..n).contains(&j) {
                    sum += v[j as usize];
                    count += 1.0;
                }
            }
            sum / count
        })
        .collect()
}

/// Width × height of the pixel extent of a non-empty mask.
pub fn extent_area(m: &Mask) -> f64 {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    let span = |v: &[usize]| (v.iter().max().unwrap() - v.iter().min().unwrap() + 1) as f64;
    span(&xs) * span(&ys)
}
