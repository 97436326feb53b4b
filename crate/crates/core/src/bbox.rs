use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::scalar::Scalar;

/// Axis-aligned box in continuous pixel coordinates, origin top-left.
///
/// Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`, so the box of a single set
/// mask cell at `(3, 4)` is `(3, 4, 4, 5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct BBox<T> {
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(x_min: T, y_min: T, x_max: T, y_max: T) -> Result<Self> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min > x_max || y_min > y_max {
            return Err(GeomError::InvalidBox {
                x_min: x_min.to_f64_lossy(),
                y_min: y_min.to_f64_lossy(),
                x_max: x_max.to_f64_lossy(),
                y_max: y_max.to_f64_lossy(),
            });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn from_center(cx: T, cy: T, width: T, height: T) -> Result<Self> {
        let two = T::lit(2.0);
        Self::new(
            cx - width / two,
            cy - height / two,
            cx + width / two,
            cy + height / two,
        )
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn center(&self) -> (T, T) {
        let two = T::lit(2.0);
        ((self.x_min + self.x_max) / two, (self.y_min + self.y_max) / two)
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }

    /// Intersection over union with continuous areas; 0 when the union is empty.
    pub fn iou(&self, other: &Self) -> T {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= T::zero() {
            T::zero()
        } else {
            inter / union
        }
    }

    /// Linear interpolation between `self` (t = 0) and `other` (t = 1).
    pub fn lerp(&self, other: &Self, t: T) -> Self {
        let mix = |a: T, b: T| a + (b - a) * t;
        Self {
            x_min: mix(self.x_min, other.x_min),
            y_min: mix(self.y_min, other.y_min),
            x_max: mix(self.x_max, other.x_max),
            y_max: mix(self.y_max, other.y_max),
        }
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    pub fn cast<U: Scalar>(&self) -> BBox<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        BBox {
            x_min: c(self.x_min),
            y_min: c(self.y_min),
            x_max: c(self.x_max),
            y_max: c(self.y_max),
        }
    }
}

/// Free-function form used by the filter passes.
pub fn bbox_iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    a.iou(b)
}
