//! Geometric primitives and evaluation metrics shared by every pipeline
//! stage: boxes, binary masks, morphology, keypoints, dense grids, occlusion
//! boundaries and the reconstruction metric suite.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`). The aliases below fix
//! the precision used across the pipeline.

pub mod bbox;
pub mod error;
pub mod grid;
pub mod keypoints;
pub mod mask;
pub mod metrics;
pub mod morph;
pub mod occlusion;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod raster;
pub mod scalar;

pub use bbox::{bbox_iou, BBox};
pub use error::{GeomError, Result};
pub use grid::{DepthGrid, FeatureGrid, FlowGrid, Grid, GridHeader};
pub use keypoints::{Keypoint, Keypoints, Skeleton, CONFIDENCE_FLOOR};
pub use mask::{boundary, mask_iou, Mask, Pixel};
pub use morph::{dilate, erode, morph, MorphOp};
pub use occlusion::{occlusion_boundary, BoundaryPixel, OcclusionMap};
pub use raster::{Frame, FrameRef, RgbImage};
pub use scalar::Scalar;

pub type BBoxF64 = BBox<f64>;
pub type BBoxF32 = BBox<f32>;
pub type KeypointF64 = Keypoint<f64>;
pub type KeypointsF64 = Keypoints<f64>;
pub type KeypointsF32 = Keypoints<f32>;
pub type OcclusionMapF32 = OcclusionMap<f32>;
pub type MetricReportF64 = metrics::MetricReport<f64>;
