//! Occlusion boundaries from a silhouette and a depth map.
//!
//! For every pixel on the silhouette boundary we look up the nearest pixel on
//! the boundary of the dilated silhouette (just outside the animal) and the
//! nearest pixel on the boundary of the eroded silhouette (just inside). With
//! larger depth meaning nearer, `delta = depth(outside) - depth(inside)`
//! exceeding `tau` marks the boundary pixel as occluded.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::grid::Grid;
use crate::mask::{boundary, Mask, Pixel};
use crate::morph::{dilate, erode};
use crate::scalar::Scalar;

pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPixel<T> {
    pub x: usize,
    pub y: usize,
    pub delta: T,
    pub occluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + for<'a> Deserialize<'a>")]
pub struct OcclusionMap<T> {
    pub boundary_pixels: Vec<BoundaryPixel<T>>,
    /// Set when the eroded silhouette vanished and deltas were taken against
    /// the boundary pixel's own depth.
    pub degenerate: bool,
}

impl<T: Scalar> OcclusionMap<T> {
    pub fn occluded_count(&self) -> usize {
        self.boundary_pixels.iter().filter(|p| p.occluded).count()
    }

    /// Occluded share of the boundary; 0 for an empty silhouette.
    pub fn fraction(&self) -> T {
        if self.boundary_pixels.is_empty() {
            return T::zero();
        }
        T::from_count(self.occluded_count()) / T::from_count(self.boundary_pixels.len())
    }
}

/// Exact Euclidean nearest-pixel lookup over a fixed point set.
///
/// Ties break towards the smaller `(y, x)`, i.e. the first pixel in row-major
/// order, so results are reproducible.
struct NearestIndex {
    // sorted by x, then y
    pts: Vec<Pixel>,
}

impl NearestIndex {
    fn new(mut pts: Vec<Pixel>) -> Self {
        pts.sort_unstable();
        Self { pts }
    }

    fn nearest(&self, p: Pixel) -> Option<Pixel> {
        if self.pts.is_empty() {
            return None;
        }
        let key = |q: &Pixel| {
            let dx = q.0 as i64 - p.0 as i64;
            let dy = q.1 as i64 - p.1 as i64;
            (dx * dx + dy * dy, q.1, q.0)
        };
        let start = self.pts.partition_point(|q| q.0 < p.0);
        let mut best: Option<(i64, usize, usize)> = None;
        let consider = |q: &Pixel, best: &mut Option<(i64, usize, usize)>| {
            let k = key(q);
            if best.is_none_or(|b| k < b) {
                *best = Some(k);
            }
        };
        // scan right then left; stop once the x gap alone exceeds the best
        for q in &self.pts[start..] {
            let dx = q.0 as i64 - p.0 as i64;
            if best.is_some_and(|b| dx * dx > b.0) {
                break;
            }
            consider(q, &mut best);
        }
        for q in self.pts[..start].iter().rev() {
            let dx = p.0 as i64 - q.0 as i64;
            if best.is_some_and(|b| dx * dx > b.0) {
                break;
            }
            consider(q, &mut best);
        }
        best.map(|(_, y, x)| (x, y))
    }
}

pub fn occlusion_boundary<T: Scalar>(
    mask: &Mask,
    depth: &Grid<T>,
    radius: usize,
    tau: T,
) -> Result<OcclusionMap<T>> {
    if mask.dims() != depth.dims() {
        return Err(GeomError::DimensionMismatch {
            left: mask.dims(),
            right: depth.dims(),
        });
    }
    let edge = boundary(mask);
    let outer = NearestIndex::new(boundary(&dilate(mask, radius)));
    let inner = NearestIndex::new(boundary(&erode(mask, radius)));
    let degenerate = inner.pts.is_empty() && !edge.is_empty();
    let d = |(x, y): Pixel| depth.at(x, y, 0);

    let boundary_pixels = edge
        .into_iter()
        .map(|p| {
            let out = outer.nearest(p).unwrap_or(p);
            let inside = inner.nearest(p).unwrap_or(p);
            let delta = d(out) - d(inside);
            BoundaryPixel {
                x: p.0,
                y: p.1,
                delta,
                occluded: delta > tau,
            }
        })
        .collect();
    Ok(OcclusionMap {
        boundary_pixels,
        degenerate,
    })
}
