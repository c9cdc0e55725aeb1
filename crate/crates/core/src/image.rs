//! Dense sample grids: images and inverse-mapping flow fields.
//!
//! Coordinates follow one convention everywhere. NDC spans `[-1, 1]` on both
//! axes and the center of pixel `(col i, row j)` sits at
//! `u = (2i + 1) / W - 1`, `v = (2j + 1) / H - 1`.

use crate::error::{Error, Result};

/// A 2-vector. `[u, v]` in NDC, `[x, y]` in pixel units.
pub type Vec2 = [f64; 2];

/// NDC coordinate of the center of pixel index `i` along an axis of `n` pixels.
#[inline]
pub fn pixel_center_ndc(i: usize, n: usize) -> f64 {
    (2 * i + 1) as f64 / n as f64 - 1.0
}

/// Continuous pixel coordinate (pixel centers at integers) of an NDC value.
#[inline]
pub fn ndc_to_pixel(u: f64, n: usize) -> f64 {
    ((u + 1.0) * n as f64 - 1.0) * 0.5
}

/// Inverse of [`ndc_to_pixel`].
#[inline]
pub fn pixel_to_ndc(x: f64, n: usize) -> f64 {
    (2.0 * x + 1.0) / n as f64 - 1.0
}

/// H×W×C real samples, row-major with interleaved channels, top-left origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::Shape("image dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} samples for {height}x{width}x{channels}, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {pos}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty image");
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Builds an image by evaluating `f(row, col, channel)` at every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for row in 0..height {
            for col in 0..width {
                for c in 0..channels {
                    data.push(f(row, col, c));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[self.index(row, col, channel)]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )))
        }
    }
}

/// Per destination pixel, the NDC source coordinate it samples from.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    data: Vec<Vec2>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, data: Vec<Vec2>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "flow dimensions must be positive, got {height}x{width}"
            )));
        }
        if height.checked_mul(width) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "expected {} flow entries for {height}x{width}, got {}",
                height.saturating_mul(width),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::Domain(format!("non-finite flow entry at index {pos}")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// The flow that samples every pixel from its own center.
    pub fn identity(height: usize, width: usize) -> Self {
        Self::from_fn(height, width, |_, _, q| q)
    }

    /// Builds a flow from `f(row, col, pixel_center_ndc)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, Vec2) -> Vec2) -> Self {
        assert!(height > 0 && width > 0, "empty flow");
        let mut data = Vec::with_capacity(height * width);
        for row in 0..height {
            let v = pixel_center_ndc(row, height);
            for col in 0..width {
                let u = pixel_center_ndc(col, width);
                data.push(f(row, col, [u, v]));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[Vec2] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Vec2 {
        self.data[row * self.width + col]
    }
}
