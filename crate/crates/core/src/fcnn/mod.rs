//! A small fully convolutional encoder-decoder regressing likelihood maps.
//!
//! The network is a flat list of layers; shapes are inferred from the input,
//! so any input whose sides survive the pooling layers can be processed.
//! Weights are stored as `f32`. Forward and backward passes are generic over
//! the arithmetic precision: training runs in `f32`, gradient checks in `f64`.

mod engine;
mod gemm;
pub mod io;
mod network;
mod tensor;
mod train;

pub use engine::{backward, forward, forward_with, loss, Gradients, Scalar};
pub use network::{Layer, LayerKind, Network};
pub use tensor::{Shape, Tensor};
pub use train::{train, TrainConfig, TrainOutcome};
