//! Reconstruction metrics: silhouette IoU, PCK, keypoint-transfer PCK,
//! MPJVE, plus the keypoint reprojection error and temporal roughness used as
//! track-quality diagnostics.

mod eval;

pub use eval::{
    evaluate, evaluate_sequence, Aggregation, EvalConfig, Exclusion, MethodReport, MetricReport, MetricRow,
    SequencePrediction, SequenceScores, SequenceTruth,
};

use crate::error::{GeomError, Result};
use crate::keypoints::{Keypoints, CONFIDENCE_FLOOR};
use crate::mask::{mask_iou, Mask};
use crate::scalar::Scalar;

/// 2D position of a mesh vertex projected into one frame.
pub type Point2<T> = [T; 2];

pub fn silhouette_iou<T: Scalar>(pred: &Mask, gt: &Mask) -> Result<T> {
    mask_iou(pred, gt)
}

/// Mean silhouette IoU over aligned frames.
pub fn sequence_iou<T: Scalar>(pred: &[Mask], gt: &[Mask]) -> Result<T> {
    if pred.len() != gt.len() {
        return Err(GeomError::SequenceTooShort {
            need: gt.len(),
            got: pred.len(),
        });
    }
    if gt.is_empty() {
        return Ok(T::zero());
    }
    let mut sum = T::zero();
    for (p, g) in pred.iter().zip(gt) {
        sum = sum + mask_iou::<T>(p, g)?;
    }
    Ok(sum / T::from_count(gt.len()))
}

fn is_valid<T: Scalar>(conf: T) -> bool {
    conf >= T::lit(CONFIDENCE_FLOOR)
}

/// Fraction of valid ground-truth joints (confidence >= 0.3) whose prediction
/// lies within `alpha * sqrt(gt_mask_area)`, inclusive.
///
/// `None` when the mask area is zero or no joint is valid; callers skip such
/// frames.
pub fn pck<T: Scalar>(pred: &Keypoints<T>, gt: &Keypoints<T>, gt_mask_area: T, alpha: T) -> Result<Option<T>> {
    if pred.len() != gt.len() {
        return Err(GeomError::JointCount(pred.len(), gt.len()));
    }
    let candidates: Vec<Option<(T, T)>> = pred.points.iter().map(|p| Some((p.x, p.y))).collect();
    Ok(pck_partial(&candidates, gt, gt_mask_area, alpha))
}

/// PCK where some joints carry no prediction at all; those are skipped.
fn pck_partial<T: Scalar>(pred: &[Option<(T, T)>], gt: &Keypoints<T>, gt_mask_area: T, alpha: T) -> Option<T> {
    if !(gt_mask_area > T::zero()) {
        return None;
    }
    let threshold = alpha * gt_mask_area.sqrt();
    let (mut hit, mut total) = (0usize, 0usize);
    for (p, g) in pred.iter().zip(&gt.points) {
        let Some((px, py)) = p else { continue };
        if !is_valid(g.confidence) {
            continue;
        }
        total += 1;
        if (*px - g.x).hypot(*py - g.y) <= threshold {
            hit += 1;
        }
    }
    (total > 0).then(|| T::from_count(hit) / T::from_count(total))
}

/// One side of a keypoint-transfer pair.
#[derive(Debug, Clone, Copy)]
pub struct TransferView<'a, T> {
    pub gt: &'a Keypoints<T>,
    pub vertices: &'a [Point2<T>],
    pub mask_area: T,
}

/// Keypoint-transfer PCK from `src` to `tgt`.
///
/// Each valid source joint snaps to its nearest projected vertex in the
/// source frame (ties to the lower vertex index); the same vertex projected
/// into the target frame becomes the transferred keypoint, scored against
/// the target ground truth with [`pck`].
pub fn keypoint_transfer_pck<T: Scalar>(src: TransferView<'_, T>, tgt: TransferView<'_, T>, alpha: T) -> Result<Option<T>> {
    if src.vertices.len() != tgt.vertices.len() {
        return Err(GeomError::JointCount(src.vertices.len(), tgt.vertices.len()));
    }
    if src.gt.len() != tgt.gt.len() {
        return Err(GeomError::JointCount(src.gt.len(), tgt.gt.len()));
    }
    if src.vertices.is_empty() {
        return Ok(None);
    }
    let transferred: Vec<Option<(T, T)>> = src
        .gt
        .points
        .iter()
        .map(|k| {
            if !is_valid(k.confidence) {
                return None;
            }
            let mut best = 0usize;
            let mut best_d = T::infinity();
            for (i, v) in src.vertices.iter().enumerate() {
                let d = (v[0] - k.x).powi(2) + (v[1] - k.y).powi(2);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            let t = tgt.vertices[best];
            Some((t[0], t[1]))
        })
        .collect();
    Ok(pck_partial(&transferred, tgt.gt, tgt.mask_area, alpha))
}

/// Mean per-joint velocity error in coordinates divided by `norm`.
pub fn mpjve<T: Scalar>(pred: &[Keypoints<T>], gt: &[Keypoints<T>], norm: T) -> Result<T> {
    let (sum, steps) = mpjve_steps(pred, gt, norm)?;
    Ok(sum / T::from_count(steps))
}

/// Sum over time steps of the joint-averaged velocity error, and the number
/// of steps. Lets callers pool MPJVE across sequences.
pub(crate) fn mpjve_steps<T: Scalar>(pred: &[Keypoints<T>], gt: &[Keypoints<T>], norm: T) -> Result<(T, usize)> {
    if pred.len() != gt.len() {
        return Err(GeomError::SequenceTooShort {
            need: gt.len(),
            got: pred.len(),
        });
    }
    if gt.len() < 2 {
        return Err(GeomError::SequenceTooShort { need: 2, got: gt.len() });
    }
    let joints = gt[0].len();
    for f in pred.iter().chain(gt) {
        if f.len() != joints {
            return Err(GeomError::JointCount(f.len(), joints));
        }
    }
    if joints == 0 {
        return Ok((T::zero(), gt.len() - 1));
    }
    let mut total = T::zero();
    for t in 0..gt.len() - 1 {
        let mut step = T::zero();
        for j in 0..joints {
            let (g0, g1) = (&gt[t].points[j], &gt[t + 1].points[j]);
            let (p0, p1) = (&pred[t].points[j], &pred[t + 1].points[j]);
            let vx = ((g1.x - g0.x) - (p1.x - p0.x)) / norm;
            let vy = ((g1.y - g0.y) - (p1.y - p0.y)) / norm;
            step = step + vx.hypot(vy);
        }
        total = total + step / T::from_count(joints);
    }
    Ok((total, gt.len() - 1))
}

/// Squared Euclidean keypoint error summed over joints.
pub fn keypoint_mse<T: Scalar>(pred: &Keypoints<T>, gt: &Keypoints<T>) -> Result<T> {
    if pred.len() != gt.len() {
        return Err(GeomError::JointCount(pred.len(), gt.len()));
    }
    Ok(pred
        .points
        .iter()
        .zip(&gt.points)
        .map(|(p, g)| (p.x - g.x).powi(2) + (p.y - g.y).powi(2))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roughness<T> {
    pub value: T,
    /// Fewer than three samples: only the first-difference term was computed.
    pub degenerate: bool,
}

/// Sum of squared first differences plus sum of squared second differences.
pub fn temporal_roughness<T: Scalar>(seq: &[Vec<T>]) -> Result<Roughness<T>> {
    let dim = seq.first().map_or(0, Vec::len);
    if let Some(bad) = seq.iter().find(|v| v.len() != dim) {
        return Err(GeomError::JointCount(bad.len(), dim));
    }
    let sq = |a: &[T], b: &[T]| -> T { a.iter().zip(b).map(|(x, y)| (*x - *y).powi(2)).sum() };
    let mut value = T::zero();
    for w in seq.windows(2) {
        value = value + sq(&w[1], &w[0]);
    }
    for w in seq.windows(3) {
        let accel: T = (0..dim)
            .map(|i| ((w[2][i] - w[1][i]) - (w[1][i] - w[0][i])).powi(2))
            .sum();
        value = value + accel;
    }
    Ok(Roughness {
        value,
        degenerate: seq.len() < 3,
    })
}
