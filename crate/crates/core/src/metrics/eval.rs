use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{keypoint_transfer_pck, mpjve_steps, pck, Point2, TransferView};
use crate::keypoints::Keypoints;
use crate::mask::{mask_iou, Mask};
use crate::scalar::Scalar;

/// Ground truth for one benchmark sequence, loaded into memory.
#[derive(Debug, Clone)]
pub struct SequenceTruth<T> {
    pub track_id: String,
    pub category: String,
    /// Side of the square crop in pixels; MPJVE divides by it.
    pub image_side: T,
    pub masks: Vec<Mask>,
    pub keypoints: Vec<Keypoints<T>>,
}

/// One method's output for one sequence.
#[derive(Debug, Clone)]
pub struct SequencePrediction<T> {
    pub masks: Vec<Mask>,
    pub keypoints: Vec<Keypoints<T>>,
    /// Per frame, the projected positions of a fixed vertex set.
    pub vertices: Option<Vec<Vec<Point2<T>>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Pool every frame (or step, for MPJVE; pair, for KT) across sequences.
    #[default]
    FrameWeighted,
    /// Average per-sequence means.
    SequenceMean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub alpha_high: f64,
    pub alpha_low: f64,
    pub kt_stride: usize,
    pub aggregation: Aggregation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alpha_high: 0.1,
            alpha_low: 0.05,
            kt_stride: 10,
            aggregation: Aggregation::FrameWeighted,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc<T> {
    sum: T,
    n: usize,
}

impl<T: Scalar> Acc<T> {
    fn push(&mut self, v: T) {
        self.sum = self.sum + v;
        self.n += 1;
    }

    fn merge(&mut self, o: &Acc<T>) {
        self.sum = self.sum + o.sum;
        self.n += o.n;
    }

    fn mean(&self) -> Option<T> {
        (self.n > 0).then(|| self.sum / T::from_count(self.n))
    }
}

/// Raw per-sequence accumulators; kept so that aggregation can pool frames.
#[derive(Debug, Clone, Default)]
pub struct SequenceScores<T> {
    iou: Acc<T>,
    pck_high: Acc<T>,
    pck_low: Acc<T>,
    kt_high: Acc<T>,
    kt_low: Acc<T>,
    mpjve: Acc<T>,
    pub frames: usize,
    /// Frames skipped by PCK (zero mask area or no valid joint).
    pub pck_skipped: usize,
}

impl<T: Scalar> SequenceScores<T> {
    pub fn row(&self) -> MetricRow<T> {
        MetricRow {
            iou: self.iou.mean(),
            pck_high: self.pck_high.mean(),
            pck_low: self.pck_low.mean(),
            kt_pck_high: self.kt_high.mean(),
            kt_pck_low: self.kt_low.mean(),
            mpjve: self.mpjve.mean(),
            sequences: 1,
            frames: self.frames,
        }
    }

    fn merge(&mut self, o: &SequenceScores<T>) {
        self.iou.merge(&o.iou);
        self.pck_high.merge(&o.pck_high);
        self.pck_low.merge(&o.pck_low);
        self.kt_high.merge(&o.kt_high);
        self.kt_low.merge(&o.kt_low);
        self.mpjve.merge(&o.mpjve);
        self.frames += o.frames;
        self.pck_skipped += o.pck_skipped;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + for<'a> Deserialize<'a>")]
pub struct MetricRow<T> {
    pub iou: Option<T>,
    #[serde(rename = "pck@0.1")]
    pub pck_high: Option<T>,
    #[serde(rename = "pck@0.05")]
    pub pck_low: Option<T>,
    #[serde(rename = "kt_pck@0.1")]
    pub kt_pck_high: Option<T>,
    #[serde(rename = "kt_pck@0.05")]
    pub kt_pck_low: Option<T>,
    pub mpjve: Option<T>,
    pub sequences: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub track_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + for<'a> Deserialize<'a>")]
pub struct SequenceRow<T> {
    pub track_id: String,
    pub category: String,
    #[serde(flatten)]
    pub metrics: MetricRow<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + for<'a> Deserialize<'a>")]
pub struct MethodReport<T> {
    pub method: String,
    pub overall: MetricRow<T>,
    pub categories: BTreeMap<String, MetricRow<T>>,
    pub sequences: Vec<SequenceRow<T>>,
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + for<'a> Deserialize<'a>")]
pub struct MetricReport<T> {
    pub aggregation: Aggregation,
    pub kt_stride: usize,
    pub methods: Vec<MethodReport<T>>,
}

fn exclude(track_id: &str, reason: impl Into<String>) -> Exclusion {
    Exclusion {
        track_id: track_id.to_string(),
        reason: reason.into(),
    }
}

/// Scores one sequence, or explains why it cannot be scored.
pub fn evaluate_sequence<T: Scalar>(
    truth: &SequenceTruth<T>,
    pred: &SequencePrediction<T>,
    cfg: &EvalConfig,
) -> Result<SequenceScores<T>, Exclusion> {
    let id = truth.track_id.as_str();
    let n = truth.masks.len();
    if truth.keypoints.len() != n {
        return Err(exclude(id, "ground truth has mismatched mask and keypoint counts"));
    }
    if pred.masks.len() != n || pred.keypoints.len() != n {
        return Err(exclude(
            id,
            format!(
                "misaligned: {} gt frames, {} predicted masks, {} predicted keypoint sets",
                n,
                pred.masks.len(),
                pred.keypoints.len()
            ),
        ));
    }
    let (a_hi, a_lo) = (T::lit(cfg.alpha_high), T::lit(cfg.alpha_low));
    let mut s = SequenceScores {
        frames: n,
        ..Default::default()
    };
    let areas: Vec<T> = truth.masks.iter().map(|m| T::from_count(m.area())).collect();
    for t in 0..n {
        let iou = mask_iou::<T>(&pred.masks[t], &truth.masks[t]).map_err(|e| exclude(id, format!("frame {t}: {e}")))?;
        s.iou.push(iou);
        let hi = pck(&pred.keypoints[t], &truth.keypoints[t], areas[t], a_hi)
            .map_err(|e| exclude(id, format!("frame {t}: {e}")))?;
        let lo = pck(&pred.keypoints[t], &truth.keypoints[t], areas[t], a_lo)
            .map_err(|e| exclude(id, format!("frame {t}: {e}")))?;
        match (hi, lo) {
            (Some(h), Some(l)) => {
                s.pck_high.push(h);
                s.pck_low.push(l);
            }
            _ => s.pck_skipped += 1,
        }
    }
    if n >= 2 {
        let (sum, steps) =
            mpjve_steps(&pred.keypoints, &truth.keypoints, truth.image_side).map_err(|e| exclude(id, e.to_string()))?;
        s.mpjve.merge(&Acc { sum, n: steps });
    }
    if let Some(verts) = &pred.vertices {
        let consistent = verts.len() == n && verts.windows(2).all(|w| w[0].len() == w[1].len());
        if !consistent {
            return Err(exclude(id, "vertex projections misaligned with frames"));
        }
        let stride = cfg.kt_stride.max(1);
        let mut t = 0;
        while t + stride < n {
            let view = |f: usize| TransferView {
                gt: &truth.keypoints[f],
                vertices: &verts[f],
                mask_area: areas[f],
            };
            let hi = keypoint_transfer_pck(view(t), view(t + stride), a_hi).map_err(|e| exclude(id, e.to_string()))?;
            let lo = keypoint_transfer_pck(view(t), view(t + stride), a_lo).map_err(|e| exclude(id, e.to_string()))?;
            if let (Some(h), Some(l)) = (hi, lo) {
                s.kt_high.push(h);
                s.kt_low.push(l);
            }
            t += stride;
        }
    }
    Ok(s)
}

fn aggregate<T: Scalar>(scores: &[&SequenceScores<T>], how: Aggregation) -> MetricRow<T> {
    match how {
        Aggregation::FrameWeighted => {
            let mut pooled = SequenceScores::default();
            for s in scores {
                pooled.merge(s);
            }
            MetricRow {
                sequences: scores.len(),
                ..pooled.row()
            }
        }
        Aggregation::SequenceMean => {
            let rows: Vec<MetricRow<T>> = scores.iter().map(|s| s.row()).collect();
            let mean = |f: &dyn Fn(&MetricRow<T>) -> Option<T>| {
                let mut acc = Acc::default();
                rows.iter().filter_map(f).for_each(|v| acc.push(v));
                acc.mean()
            };
            MetricRow {
                iou: mean(&|r| r.iou),
                pck_high: mean(&|r| r.pck_high),
                pck_low: mean(&|r| r.pck_low),
                kt_pck_high: mean(&|r| r.kt_pck_high),
                kt_pck_low: mean(&|r| r.kt_pck_low),
                mpjve: mean(&|r| r.mpjve),
                sequences: scores.len(),
                frames: scores.iter().map(|s| s.frames).sum(),
            }
        }
    }
}

/// Scores every method against the benchmark.
///
/// `predictions` maps method name to per-track predictions; a track without
/// a prediction is reported as an exclusion for that method.
pub fn evaluate<T: Scalar>(
    truth: &[SequenceTruth<T>],
    predictions: &BTreeMap<String, BTreeMap<String, SequencePrediction<T>>>,
    cfg: &EvalConfig,
) -> MetricReport<T> {
    let mut methods = Vec::new();
    for (method, preds) in predictions {
        let mut scored: Vec<(&SequenceTruth<T>, SequenceScores<T>)> = Vec::new();
        let mut exclusions = Vec::new();
        for seq in truth {
            match preds.get(&seq.track_id) {
                None => exclusions.push(exclude(&seq.track_id, "no prediction")),
                Some(p) => match evaluate_sequence(seq, p, cfg) {
                    Ok(s) => scored.push((seq, s)),
                    Err(e) => exclusions.push(e),
                },
            }
        }
        for id in preds.keys() {
            if !truth.iter().any(|s| &s.track_id == id) {
                exclusions.push(exclude(id, "prediction for a sequence not in the manifest"));
            }
        }
        let all: Vec<&SequenceScores<T>> = scored.iter().map(|(_, s)| s).collect();
        let mut categories = BTreeMap::new();
        let mut names: Vec<&str> = scored.iter().map(|(t, _)| t.category.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        for c in names {
            let members: Vec<&SequenceScores<T>> =
                scored.iter().filter(|(t, _)| t.category == c).map(|(_, s)| s).collect();
            categories.insert(c.to_string(), aggregate(&members, cfg.aggregation));
        }
        methods.push(MethodReport {
            method: method.clone(),
            overall: aggregate(&all, cfg.aggregation),
            categories,
            sequences: scored
                .iter()
                .map(|(t, s)| SequenceRow {
                    track_id: t.track_id.clone(),
                    category: t.category.clone(),
                    metrics: s.row(),
                })
                .collect(),
            exclusions,
        });
    }
    MetricReport {
        aggregation: cfg.aggregation,
        kt_stride: cfg.kt_stride,
        methods,
    }
}

impl<T: Scalar> MetricReport<T> {
    /// Plain-text table, one row per method (overall) then per category.
    pub fn to_table(&self) -> String {
        let header = ["Method", "IoU", "PCK@0.1", "PCK@0.05", "KT-PCK@0.1", "KT-PCK@0.05", "MPJVE"];
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        let fmt = |v: Option<T>| v.map_or_else(|| "-".to_string(), |x| format!("{:.3}", x.to_f64_lossy()));
        let line = |name: String, r: &MetricRow<T>| {
            vec![
                name,
                fmt(r.iou),
                fmt(r.pck_high),
                fmt(r.pck_low),
                fmt(r.kt_pck_high),
                fmt(r.kt_pck_low),
                fmt(r.mpjve),
            ]
        };
        for m in &self.methods {
            rows.push(line(m.method.clone(), &m.overall));
            for (c, r) in &m.categories {
                rows.push(line(format!("  {c}"), r));
            }
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (k, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{:<w$}", c, w = widths[i])
                    } else {
                        format!("{:>w$}", c, w = widths[i])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if k == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        for m in &self.methods {
            for e in &m.exclusions {
                let _ = writeln!(out, "excluded [{}] {}: {}", m.method, e.track_id, e.reason);
            }
        }
        out
    }
}
