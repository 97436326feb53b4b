use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{GeomError, Result};
use crate::scalar::Scalar;

/// Integer pixel coordinate `(x, y)`.
pub type Pixel = (usize, usize);

/// Binary silhouette, row-major (`y * width + x`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(GeomError::BufferSize {
                width,
                height,
                channels: 1,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`Mask::get`] but out-of-range coordinates read as unset.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| (i % self.width, i / self.width))
    }

    fn check_dims(&self, other: &Mask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(GeomError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &Mask) -> Result<usize> {
        self.check_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a && **b)
            .count())
    }

    pub fn union_count(&self, other: &Mask) -> Result<usize> {
        self.check_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a || **b)
            .count())
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Mask) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b))
    }

    pub fn complement(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.check_dims(other)?;
        Ok(Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        })
    }

    pub fn subtract(&self, other: &Mask) -> Result<Mask> {
        self.check_dims(other)?;
        Ok(Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && !*b).collect(),
        })
    }

    /// Tight box around the set cells, or `None` for an empty mask.
    pub fn bbox<T: Scalar>(&self) -> Option<BBox<T>> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for (x, y) in self.pixels() {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        if x0 == usize::MAX {
            return None;
        }
        Some(BBox {
            x_min: T::from_count(x0),
            y_min: T::from_count(y0),
            x_max: T::from_count(x1 + 1),
            y_max: T::from_count(y1 + 1),
        })
    }
}

/// Set-bit intersection over union; 0 when both masks are empty.
pub fn mask_iou<T: Scalar>(a: &Mask, b: &Mask) -> Result<T> {
    let inter = a.intersection_count(b)?;
    let union = a.union_count(b)?;
    if union == 0 {
        return Ok(T::zero());
    }
    Ok(T::from_count(inter) / T::from_count(union))
}

/// Set cells with at least one unset 4-neighbour or lying on the image edge,
/// in row-major order.
pub fn boundary(mask: &Mask) -> Vec<Pixel> {
    let (w, h) = mask.dims();
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let on_edge = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            if on_edge
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1)
            {
                out.push((x, y));
            }
        }
    }
    out
}
