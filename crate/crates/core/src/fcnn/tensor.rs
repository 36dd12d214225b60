use crate::error::{Error, Result};
use crate::raster::MultiChannelRaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Channel-major (`C x H x W`) float tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!("tensor data length {} != {shape}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite tensor value".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self { shape, data: vec![0.0; shape.len()] }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.shape.height + y) * self.shape.width + x]
    }

    /// De-interleaves a raster into channel planes.
    pub fn from_raster(r: &MultiChannelRaster) -> Self {
        let shape = Shape::new(r.channels(), r.height(), r.width());
        let mut data = vec![0.0f32; shape.len()];
        let plane = shape.plane();
        for (p, px) in r.data().chunks_exact(r.channels()).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[c * plane + p] = v;
            }
        }
        Self { shape, data }
    }

    pub fn to_raster(&self) -> MultiChannelRaster {
        let Shape { channels, height, width } = self.shape;
        let plane = self.shape.plane();
        let mut data = vec![0.0f32; self.shape.len()];
        for p in 0..plane {
            for c in 0..channels {
                data[p * channels + c] = self.data[c * plane + p];
            }
        }
        MultiChannelRaster::new(width, height, channels, data).expect("tensor values are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_conversion_round_trip() {
        let r = MultiChannelRaster::new(2, 2, 3, (0..12).map(|v| v as f32).collect()).unwrap();
        let t = Tensor::from_raster(&r);
        assert_eq!(t.shape(), Shape::new(3, 2, 2));
        assert_eq!(t.get(1, 0, 1), 4.0);
        assert_eq!(t.to_raster(), r);
    }

    #[test]
    fn rejects_bad_length() {
        assert!(Tensor::new(Shape::new(1, 2, 2), vec![0.0; 3]).is_err());
    }
}
