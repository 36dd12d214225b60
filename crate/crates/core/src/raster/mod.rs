//! Raster containers and the image-processing primitives the pipeline is
//! built from.

mod components;
mod distance;
pub mod io;
mod otsu;

pub use components::{connected_components, weighted_centroid, Connectivity};
pub use distance::distance_transform;
pub use otsu::{otsu_threshold, DEFAULT_OTSU_BINS};

use crate::error::{Error, Result};

/// Row-major float raster with `channels` interleaved values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelRaster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl MultiChannelRaster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("raster needs at least one channel".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "raster data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite raster value at index {bad}")));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels > 0, "raster needs at least one channel");
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    /// Builds a single-channel raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, channels: 1, data }
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Panics on non-finite values; rasters never hold NaN or infinities.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f32) {
        assert!(value.is_finite(), "raster values must be finite");
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// The pixel's channel values.
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Applies `f` to every value, keeping the shape.
    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Self {
        let data = self.data.iter().map(|&v| f(v)).collect::<Vec<_>>();
        assert!(data.iter().all(|v| v.is_finite()), "mapped raster values must be finite");
        Self { data, ..*self }
    }

    pub fn require_single_channel(&self) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::Shape(format!("expected 1 channel, got {}", self.channels)));
        }
        Ok(())
    }
}

/// One boolean per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape(format!("mask length {} != {width}x{height}", bits.len())));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Per-pixel region labels; 0 is background, regions are `1..=region_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRegions {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    region_count: usize,
}

impl LabeledRegions {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel lists for every region, index `i` holding label `i + 1`, each in
    /// raster-scan order.
    pub fn regions(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.region_count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push((i % self.width, i / self.width));
            }
        }
        out
    }
}
