use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::Shape;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Square convolution with bias; weights laid out `[out][in][ky][kx]`.
    Conv { in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize },
    Relu,
    /// 2x2 max pooling with stride 2.
    Downsample2,
    /// Nearest-neighbor upsampling by 2.
    Upsample2,
    /// Adds the output of an earlier layer (0-based index) to the current tensor.
    SkipAdd { from: usize },
    /// Two parallel "same" convolutions, narrow and wide, summed, with one
    /// shared bias. Parameters: narrow weights, wide weights, bias.
    MultiscaleConv { in_channels: usize, out_channels: usize, narrow: usize, wide: usize },
}

impl LayerKind {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerKind::Conv { in_channels, out_channels, kernel, .. } => {
                out_channels * in_channels * kernel * kernel + out_channels
            }
            LayerKind::MultiscaleConv { in_channels, out_channels, narrow, wide } => {
                out_channels * in_channels * (narrow * narrow + wide * wide) + out_channels
            }
            _ => 0,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Conv { in_channels, kernel, .. } => in_channels * kernel * kernel,
            LayerKind::MultiscaleConv { in_channels, narrow, wide, .. } => {
                in_channels * (narrow * narrow + wide * wide)
            }
            _ => 0,
        }
    }

    /// Number of bias entries at the end of the parameter vector.
    pub(crate) fn bias_len(&self) -> usize {
        match *self {
            LayerKind::Conv { out_channels, .. } | LayerKind::MultiscaleConv { out_channels, .. } => {
                out_channels
            }
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub params: Vec<f32>,
}

impl Layer {
    pub fn new(kind: LayerKind) -> Self {
        Self { params: vec![0.0; kind.param_count()], kind }
    }

    pub fn conv(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self::new(LayerKind::Conv { in_channels, out_channels, kernel, stride: 1, pad: kernel / 2 })
    }

    pub fn multiscale(in_channels: usize, out_channels: usize, narrow: usize, wide: usize) -> Self {
        Self::new(LayerKind::MultiscaleConv { in_channels, out_channels, narrow, wide })
    }

    pub fn bias(&self) -> &[f32] {
        &self.params[self.params.len() - self.kind.bias_len()..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_channels: usize,
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_channels: usize, layers: Vec<Layer>) -> Result<Self> {
        for (i, l) in layers.iter().enumerate() {
            if l.params.len() != l.kind.param_count() {
                return Err(Error::LayerShape {
                    layer: i,
                    detail: format!(
                        "{} parameters, expected {}",
                        l.params.len(),
                        l.kind.param_count()
                    ),
                });
            }
            match l.kind {
                LayerKind::Conv { kernel, stride, .. } if kernel % 2 == 0 || stride == 0 => {
                    return Err(Error::LayerShape {
                        layer: i,
                        detail: "conv kernels must be odd and strides positive".into(),
                    })
                }
                LayerKind::MultiscaleConv { narrow, wide, .. } if narrow % 2 == 0 || wide % 2 == 0 => {
                    return Err(Error::LayerShape {
                        layer: i,
                        detail: "multiscale kernels must be odd".into(),
                    })
                }
                LayerKind::SkipAdd { from } if from >= i => {
                    return Err(Error::LayerShape {
                        layer: i,
                        detail: format!("skip source {from} is not an earlier layer"),
                    })
                }
                _ => {}
            }
        }
        Ok(Self { input_channels, layers })
    }

    /// The default encoder-decoder: a contracting path with a multiscale
    /// (narrow + wide kernel) block, an expanding path, and a skip that reuses
    /// the early high-resolution features. Input sides must be multiples of 4.
    pub fn toy(input_channels: usize, seed: u64) -> Self {
        let layers = vec![
            Layer::conv(input_channels, 16, 3),
            Layer::new(LayerKind::Relu),
            Layer::new(LayerKind::Downsample2),
            Layer::multiscale(16, 32, 3, 7),
            Layer::new(LayerKind::Relu),
            Layer::new(LayerKind::Downsample2),
            Layer::conv(32, 32, 3),
            Layer::new(LayerKind::Relu),
            Layer::new(LayerKind::Upsample2),
            Layer::conv(32, 16, 3),
            Layer::new(LayerKind::Relu),
            Layer::new(LayerKind::SkipAdd { from: 2 }),
            Layer::new(LayerKind::Upsample2),
            Layer::conv(16, 1, 3),
        ];
        let mut net = Self::new(input_channels, layers).expect("toy architecture is valid");
        net.init_he(seed);
        net
    }

    /// He-style uniform initialization: weights in `±sqrt(6 / fan_in)`,
    /// biases zero. The last parametric layer starts at a tenth of that
    /// bound so the first predictions sit near zero.
    pub fn init_he(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = self.layers.iter().rposition(|l| l.kind.fan_in() > 0);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let fan_in = layer.kind.fan_in();
            if fan_in == 0 {
                continue;
            }
            let scale = if Some(i) == last { 0.1 } else { 1.0 };
            let bound = (scale * (6.0 / fan_in as f64).sqrt()) as f32;
            let n_weights = layer.params.len() - layer.kind.bias_len();
            for (j, p) in layer.params.iter_mut().enumerate() {
                *p = if j < n_weights { rng.random_range(-bound..bound) } else { 0.0 };
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }

    /// Output shape of every layer for the given input shape, validating
    /// that consecutive layers compose.
    pub fn layer_shapes(&self, input: Shape) -> Result<Vec<Shape>> {
        if input.channels != self.input_channels {
            return Err(Error::LayerShape {
                layer: 0,
                detail: format!(
                    "input has {} channels, network expects {}",
                    input.channels, self.input_channels
                ),
            });
        }
        let mut shapes: Vec<Shape> = Vec::with_capacity(self.layers.len());
        let mut cur = input;
        for (i, layer) in self.layers.iter().enumerate() {
            let err = |detail: String| Error::LayerShape { layer: i, detail };
            cur = match layer.kind {
                LayerKind::Conv { in_channels, out_channels, kernel, stride, pad } => {
                    if cur.channels != in_channels {
                        return Err(err(format!("expects {in_channels} channels, got {cur}")));
                    }
                    let (h, w) = (cur.height + 2 * pad, cur.width + 2 * pad);
                    if h < kernel || w < kernel {
                        return Err(err(format!("kernel {kernel} larger than padded {cur}")));
                    }
                    Shape::new(out_channels, (h - kernel) / stride + 1, (w - kernel) / stride + 1)
                }
                LayerKind::MultiscaleConv { in_channels, out_channels, .. } => {
                    if cur.channels != in_channels {
                        return Err(err(format!("expects {in_channels} channels, got {cur}")));
                    }
                    Shape::new(out_channels, cur.height, cur.width)
                }
                LayerKind::Relu => cur,
                LayerKind::Downsample2 => {
                    if !cur.height.is_multiple_of(2) || !cur.width.is_multiple_of(2) || cur.is_empty() {
                        return Err(err(format!("cannot pool odd-sized {cur}")));
                    }
                    Shape::new(cur.channels, cur.height / 2, cur.width / 2)
                }
                LayerKind::Upsample2 => Shape::new(cur.channels, cur.height * 2, cur.width * 2),
                LayerKind::SkipAdd { from } => {
                    if shapes[from] != cur {
                        return Err(err(format!(
                            "skip from layer {from} has shape {}, current is {cur}",
                            shapes[from]
                        )));
                    }
                    cur
                }
            };
            shapes.push(cur);
        }
        let out = shapes.last().copied().unwrap_or(input);
        if out != Shape::new(1, input.height, input.width) {
            return Err(Error::LayerShape {
                layer: self.layers.len().saturating_sub(1),
                detail: format!("network output {out} is not 1x{}x{}", input.height, input.width),
            });
        }
        Ok(shapes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_shapes_compose() {
        let net = Network::toy(4, 1);
        let shapes = net.layer_shapes(Shape::new(4, 64, 64)).unwrap();
        assert_eq!(shapes[2], Shape::new(16, 32, 32));
        assert_eq!(shapes[11], Shape::new(16, 32, 32));
        assert_eq!(*shapes.last().unwrap(), Shape::new(1, 64, 64));
        assert!((40_000..60_000).contains(&net.param_count()), "{}", net.param_count());
    }

    #[test]
    fn toy_rejects_sides_not_divisible_by_four() {
        let net = Network::toy(4, 1);
        let err = net.layer_shapes(Shape::new(4, 30, 30)).unwrap_err();
        assert!(matches!(err, Error::LayerShape { layer: 5, .. }), "{err}");
    }

    #[test]
    fn wrong_channel_count_reports_layer() {
        let net = Network::toy(4, 1);
        assert!(matches!(
            net.layer_shapes(Shape::new(3, 8, 8)),
            Err(Error::LayerShape { layer: 0, .. })
        ));
    }

    #[test]
    fn even_kernel_is_invalid() {
        let l = Layer::new(LayerKind::Conv { in_channels: 1, out_channels: 1, kernel: 2, stride: 1, pad: 0 });
        assert!(Network::new(1, vec![l]).is_err());
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(Network::toy(4, 9), Network::toy(4, 9));
        assert_ne!(Network::toy(4, 9), Network::toy(4, 10));
    }
}
