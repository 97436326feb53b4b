//! Dense per-pixel grids (depth, flow, features) and their binary encoding.
//!
//! Encoding: `u32` little-endian header length `n`, then `n` bytes of JSON
//! `{"width":W,"height":H,"channels":C}`, then `W*H*C` little-endian `f32`
//! values in row-major, channel-interleaved order.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<T>,
}

/// Per-cell depth, larger values nearer to the camera.
pub type DepthGrid = Grid<f32>;
/// Per-cell `(dx, dy)` displacement to the next frame in pixels.
pub type FlowGrid = Grid<f32>;
/// Per-cell D-dimensional descriptor.
pub type FeatureGrid = Grid<f32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridHeader {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl<T: Copy + Default> Grid<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            values: vec![T::default(); width * height * channels],
        }
    }

    pub fn from_values(width: usize, height: usize, channels: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != width * height * channels || channels == 0 {
            return Err(GeomError::BufferSize {
                width,
                height,
                channels,
                got: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    values.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            width: self.width,
            height: self.height,
            channels: self.channels,
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> T {
        self.values[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        self.values[(y * self.width + x) * self.channels + c] = v;
    }

    /// All channels of one cell.
    pub fn cell(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.channels;
        &self.values[i..i + self.channels]
    }
}

impl Grid<f32> {
    pub fn encode(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::with_capacity(4 + header.len() + self.values.len() * 4);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let codec = |m: &str| GeomError::Codec(m.to_string());
        if bytes.len() < 4 {
            return Err(codec("truncated header length"));
        }
        let n = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let body = bytes.get(4..4 + n).ok_or_else(|| codec("truncated header"))?;
        let h: GridHeader = serde_json::from_slice(body).map_err(|e| codec(&e.to_string()))?;
        let payload = &bytes[4 + n..];
        let expected = h.width * h.height * h.channels;
        if payload.len() != expected * 4 {
            return Err(GeomError::Codec(format!(
                "payload has {} bytes, header declares {} floats",
                payload.len(),
                expected
            )));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(h.width, h.height, h.channels, values)
    }

    /// Min/max over the first channel; `None` for an empty grid.
    pub fn min_max(&self) -> Option<(f32, f32)> {
        let mut it = self.values.iter().step_by(self.channels.max(1)).copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// Rescales a single-channel grid to `[0, 1]`; a constant grid maps to 0.
    pub fn normalized(&self) -> (Self, f32, f32) {
        let (lo, hi) = self.min_max().unwrap_or((0.0, 0.0));
        let span = hi - lo;
        let values = self
            .values
            .iter()
            .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
            .collect();
        (
            Self {
                values,
                ..self.clone()
            },
            lo,
            hi,
        )
    }
}
