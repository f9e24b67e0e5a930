//! Dense channel-major (C×H×W) grids of `f32` values.
//!
//! These are the in-memory form of the network-style outputs the pipeline
//! consumes: keypoint heatmaps, part affinity fields and segmentation maps.
//! Values are stored row-major within each channel. A grid cell `(x, y)`
//! samples the continuous location `(x as f64, y as f64)`, i.e. cell centers
//! sit on integer coordinates.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorError {
    /// Data length does not equal `channels · height · width`.
    LengthMismatch {
        expected: usize,
        got: usize,
    },
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::LengthMismatch { expected, got } => {
                write!(f, "tensor data length {got} does not match shape ({expected})")
            }
            TensorError::ShapeMismatch { expected, got } => write!(
                f,
                "expected tensor shape {}x{}x{}, got {}x{}x{}",
                expected.0, expected.1, expected.2, got.0, got.1, got.2
            ),
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for TensorError {}

/// A C×H×W grid of `f32` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor {
    /// All-zero tensor of the given shape.
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Wraps an existing buffer; the length must match the shape.
    pub fn from_data(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self, TensorError> {
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(TensorError::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Row-major slice of one channel.
    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Bilinear sample of one channel at a continuous location.
    ///
    /// Coordinates are clamped to the valid cell-center range, so samples
    /// slightly outside the grid read the nearest border value.
    pub fn sample_bilinear(&self, c: usize, x: f64, y: f64) -> f64 {
        let xm = (self.width - 1) as f64;
        let ym = (self.height - 1) as f64;
        let x = x.clamp(0.0, xm);
        let y = y.clamp(0.0, ym);
        let x0 = x as usize;
        let y0 = y as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.at(c, y0, x0) as f64;
        let v10 = self.at(c, y0, x1) as f64;
        let v01 = self.at(c, y1, x0) as f64;
        let v11 = self.at(c, y1, x1) as f64;
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }

    /// Checks the exact shape, for APIs with fixed channel layouts.
    pub fn expect_shape(
        &self,
        channels: usize,
        height: usize,
        width: usize,
    ) -> Result<(), TensorError> {
        if self.shape() != (channels, height, width) {
            return Err(TensorError::ShapeMismatch {
                expected: (channels, height, width),
                got: self.shape(),
            });
        }
        Ok(())
    }
}
