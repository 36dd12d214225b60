//! Forward and backward passes.

use std::ops::{Add, AddAssign, Mul, Sub};

use super::gemm::{gemm_abt_f64, gemm_acc};
use super::network::{LayerKind, Network};
use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

/// Arithmetic precision of a forward/backward pass.
pub trait Scalar:
    Copy
    + Default
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    fn from_f32(v: f32) -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    fn from_f32(v: f32) -> Self {
        v
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// `dE/dw` for every layer, in the layout of [`super::Layer::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(net: &Network) -> Self {
        Self { layers: net.layers.iter().map(|l| vec![0.0; l.params.len()]).collect() }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.layers.iter_mut().flatten().for_each(|g| *g *= factor);
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flatten().copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Euclidean loss `E = sum_x (r(x) - p(x))^2`, accumulated in `f64`.
pub fn loss(prediction: &Tensor, target: &Tensor) -> Result<f64> {
    if prediction.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {} and target {} differ",
            prediction.shape(),
            target.shape()
        )));
    }
    Ok(prediction
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &r)| {
            let d = r as f64 - p as f64;
            d * d
        })
        .sum())
}

/// Single-precision forward pass.
pub fn forward(net: &Network, input: &Tensor) -> Result<Tensor> {
    let trace = run_forward::<f32>(net, input)?;
    let out_shape = *trace.shapes.last().unwrap_or(&input.shape());
    let data = trace.outputs.into_iter().last().unwrap_or_else(|| input.data().to_vec());
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("network produced non-finite output".into()));
    }
    Tensor::new(out_shape, data)
}

/// Forward pass in precision `T`, returning the output values as `f64`.
pub fn forward_with<T: Scalar>(net: &Network, input: &Tensor) -> Result<Vec<f64>> {
    let trace = run_forward::<T>(net, input)?;
    let out = match trace.outputs.last() {
        Some(o) => o.iter().map(|v| v.to_f64()).collect(),
        None => input.data().iter().map(|&v| v as f64).collect(),
    };
    Ok(out)
}

/// Loss and `dE/dw` for one sample, computed in precision `T`.
pub fn backward<T: Scalar>(net: &Network, input: &Tensor, target: &Tensor) -> Result<(f64, Gradients)> {
    let trace = run_forward::<T>(net, input)?;
    let out_shape = *trace.shapes.last().unwrap_or(&input.shape());
    if target.shape() != out_shape {
        return Err(Error::Shape(format!("target {} vs output {out_shape}", target.shape())));
    }
    let n = net.layers.len();
    let mut grads = Gradients::zeros(net);
    let output = trace.outputs.last().map(|v| v.as_slice()).unwrap_or(&trace.input);

    let mut loss = 0.0f64;
    let mut dout = Vec::with_capacity(output.len());
    for (&p, &r) in output.iter().zip(target.data()) {
        let diff = p.to_f64() - r as f64;
        loss += diff * diff;
        dout.push(T::from_f64(2.0 * diff));
    }
    if n == 0 {
        return Ok((loss, grads));
    }

    let mut pending: Vec<Option<Vec<T>>> = vec![None; n];
    pending[n - 1] = Some(dout);

    for l in (0..n).rev() {
        let Some(g) = pending[l].take() else { continue };
        let layer = &net.layers[l];
        let in_shape = if l == 0 { trace.input_shape } else { trace.shapes[l - 1] };
        let out_shape = trace.shapes[l];
        let input_vals: &[T] = if l == 0 { &trace.input } else { &trace.outputs[l - 1] };
        let need_input_grad = l > 0;

        let grad_in: Option<Vec<T>> = match layer.kind {
            LayerKind::Conv { kernel, stride, pad, .. } => {
                let w = &trace.params[l];
                let n_w = w.len() - layer.kind.bias_len();
                let (gw, gb) = grads.layers[l].split_at_mut(n_w);
                let mut gin = need_input_grad.then(|| vec![T::ZERO; in_shape.len()]);
                let geom = ConvGeom { input: in_shape, output: out_shape, kernel, stride, pad };
                conv_backward(input_vals, &w[..n_w], &g, geom, gw, gin.as_deref_mut());
                bias_backward(&g, out_shape, gb);
                gin
            }
            LayerKind::MultiscaleConv { narrow, wide, in_channels, out_channels } => {
                let w = &trace.params[l];
                let n_narrow = out_channels * in_channels * narrow * narrow;
                let n_wide = out_channels * in_channels * wide * wide;
                let (gn, rest) = grads.layers[l].split_at_mut(n_narrow);
                let (gwd, gb) = rest.split_at_mut(n_wide);
                let mut gin = need_input_grad.then(|| vec![T::ZERO; in_shape.len()]);
                let narrow_geom =
                    ConvGeom { input: in_shape, output: out_shape, kernel: narrow, stride: 1, pad: narrow / 2 };
                let wide_geom =
                    ConvGeom { input: in_shape, output: out_shape, kernel: wide, stride: 1, pad: wide / 2 };
                conv_backward(input_vals, &w[..n_narrow], &g, narrow_geom, gn, gin.as_deref_mut());
                conv_backward(
                    input_vals,
                    &w[n_narrow..n_narrow + n_wide],
                    &g,
                    wide_geom,
                    gwd,
                    gin.as_deref_mut(),
                );
                bias_backward(&g, out_shape, gb);
                gin
            }
            LayerKind::Relu => need_input_grad.then(|| {
                let out = &trace.outputs[l];
                g.iter()
                    .zip(out)
                    .map(|(&gv, &o)| if o > T::ZERO { gv } else { T::ZERO })
                    .collect()
            }),
            LayerKind::Downsample2 => need_input_grad.then(|| {
                let mut gin = vec![T::ZERO; in_shape.len()];
                for (&gv, &src) in g.iter().zip(&trace.pool_argmax[l]) {
                    gin[src as usize] += gv;
                }
                gin
            }),
            LayerKind::Upsample2 => need_input_grad.then(|| {
                let mut gin = vec![T::ZERO; in_shape.len()];
                upsample_backward(&g, out_shape, &mut gin, in_shape);
                gin
            }),
            LayerKind::SkipAdd { from } => {
                accumulate(&mut pending[from], &g);
                need_input_grad.then_some(g)
            }
        };

        if let Some(gin) = grad_in {
            accumulate(&mut pending[l - 1], &gin);
        }
    }
    Ok((loss, grads))
}

fn accumulate<T: Scalar>(slot: &mut Option<Vec<T>>, g: &[T]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}

struct Trace<T> {
    input: Vec<T>,
    input_shape: Shape,
    shapes: Vec<Shape>,
    outputs: Vec<Vec<T>>,
    params: Vec<Vec<T>>,
    pool_argmax: Vec<Vec<u32>>,
}

fn run_forward<T: Scalar>(net: &Network, input: &Tensor) -> Result<Trace<T>> {
    let shapes = net.layer_shapes(input.shape())?;
    let params: Vec<Vec<T>> =
        net.layers.iter().map(|l| l.params.iter().map(|&p| T::from_f32(p)).collect()).collect();
    let x: Vec<T> = input.data().iter().map(|&v| T::from_f32(v)).collect();
    let mut outputs: Vec<Vec<T>> = Vec::with_capacity(net.layers.len());
    let mut pool_argmax = vec![Vec::new(); net.layers.len()];

    for (l, layer) in net.layers.iter().enumerate() {
        let in_shape = if l == 0 { input.shape() } else { shapes[l - 1] };
        let out_shape = shapes[l];
        let cur: &[T] = if l == 0 { &x } else { &outputs[l - 1] };
        let out = match layer.kind {
            LayerKind::Conv { kernel, stride, pad, .. } => {
                let w = &params[l];
                let n_w = w.len() - layer.kind.bias_len();
                let mut out = bias_fill(&w[n_w..], out_shape);
                let geom = ConvGeom { input: in_shape, output: out_shape, kernel, stride, pad };
                conv_accumulate(cur, &w[..n_w], geom, &mut out);
                out
            }
            LayerKind::MultiscaleConv { in_channels, out_channels, narrow, wide } => {
                let w = &params[l];
                let n_narrow = out_channels * in_channels * narrow * narrow;
                let n_wide = out_channels * in_channels * wide * wide;
                let mut out = bias_fill(&w[n_narrow + n_wide..], out_shape);
                let geom =
                    ConvGeom { input: in_shape, output: out_shape, kernel: narrow, stride: 1, pad: narrow / 2 };
                conv_accumulate(cur, &w[..n_narrow], geom, &mut out);
                let geom = ConvGeom { kernel: wide, pad: wide / 2, ..geom };
                conv_accumulate(cur, &w[n_narrow..n_narrow + n_wide], geom, &mut out);
                out
            }
            LayerKind::Relu => cur.iter().map(|&v| if v > T::ZERO { v } else { T::ZERO }).collect(),
            LayerKind::Downsample2 => {
                let (out, idx) = maxpool_forward(cur, in_shape, out_shape);
                pool_argmax[l] = idx;
                out
            }
            LayerKind::Upsample2 => upsample_forward(cur, in_shape, out_shape),
            LayerKind::SkipAdd { from } => {
                cur.iter().zip(&outputs[from]).map(|(&a, &b)| a + b).collect()
            }
        };
        outputs.push(out);
    }
    Ok(Trace { input: x, input_shape: input.shape(), shapes, outputs, params, pool_argmax })
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    input: Shape,
    output: Shape,
    kernel: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    /// Output index range `[lo, hi)` along one axis for which the input
    /// coordinate `o * stride + offset` lies inside `[0, extent)`.
    fn valid_range(&self, offset: isize, extent: usize, out_extent: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let lo = if offset >= 0 { 0 } else { (-offset + s - 1) / s };
        let hi = if extent as isize - offset <= 0 { 0 } else { (extent as isize - offset + s - 1) / s };
        let hi = hi.min(out_extent as isize);
        (lo.max(0) as usize, hi.max(lo).max(0) as usize)
    }
}

fn bias_fill<T: Scalar>(bias: &[T], shape: Shape) -> Vec<T> {
    let plane = shape.plane();
    let mut out = Vec::with_capacity(shape.len());
    for &b in bias {
        out.extend(std::iter::repeat_n(b, plane));
    }
    out
}

fn conv_accumulate<T: Scalar>(input: &[T], weights: &[T], g: ConvGeom, out: &mut [T]) {
    let cols = im2col(input, g);
    let k = g.input.channels * g.kernel * g.kernel;
    gemm_acc(g.output.channels, k, g.output.plane(), weights, &cols, out);
}

fn conv_backward<T: Scalar>(
    input: &[T],
    weights: &[T],
    grad_out: &[T],
    g: ConvGeom,
    grad_w: &mut [f64],
    grad_in: Option<&mut [T]>,
) {
    let cols = im2col(input, g);
    let (oc, k, n) = (g.output.channels, g.input.channels * g.kernel * g.kernel, g.output.plane());
    gemm_abt_f64(oc, k, n, grad_out, &cols, grad_w);
    if let Some(grad_in) = grad_in {
        let mut wt = vec![T::ZERO; k * oc];
        for o in 0..oc {
            for p in 0..k {
                wt[p * oc + o] = weights[o * k + p];
            }
        }
        let mut dcols = vec![T::ZERO; k * n];
        gemm_acc(k, oc, n, &wt, grad_out, &mut dcols);
        col2im_add(&dcols, g, grad_in);
    }
}

/// Unfolds the input into a `(in_channels * k * k) x (out_h * out_w)` matrix
/// of shifted planes, zero outside the input.
fn im2col<T: Scalar>(input: &[T], g: ConvGeom) -> Vec<T> {
    let (ic, ih, iw) = (g.input.channels, g.input.height, g.input.width);
    let (oh, ow) = (g.output.height, g.output.width);
    let k = g.kernel;
    let n = oh * ow;
    let mut cols = vec![T::ZERO; ic * k * k * n];
    for i in 0..ic {
        let in_plane = &input[i * ih * iw..(i + 1) * ih * iw];
        for ky in 0..k {
            let dy = ky as isize - g.pad as isize;
            let (y0, y1) = g.valid_range(dy, ih, oh);
            for kx in 0..k {
                let dx = kx as isize - g.pad as isize;
                let (x0, x1) = g.valid_range(dx, iw, ow);
                if x0 >= x1 {
                    continue;
                }
                let row = &mut cols[((i * k + ky) * k + kx) * n..][..n];
                for y in y0..y1 {
                    let iy = ((y * g.stride) as isize + dy) as usize;
                    let dst = &mut row[y * ow + x0..y * ow + x1];
                    if g.stride == 1 {
                        let lo = iy * iw + (x0 as isize + dx) as usize;
                        dst.copy_from_slice(&in_plane[lo..lo + (x1 - x0)]);
                    } else {
                        for (j, d) in dst.iter_mut().enumerate() {
                            let ix = (((x0 + j) * g.stride) as isize + dx) as usize;
                            *d = in_plane[iy * iw + ix];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
fn col2im_add<T: Scalar>(cols: &[T], g: ConvGeom, grad_in: &mut [T]) {
    let (ic, ih, iw) = (g.input.channels, g.input.height, g.input.width);
    let (oh, ow) = (g.output.height, g.output.width);
    let k = g.kernel;
    let n = oh * ow;
    for i in 0..ic {
        let plane = &mut grad_in[i * ih * iw..(i + 1) * ih * iw];
        for ky in 0..k {
            let dy = ky as isize - g.pad as isize;
            let (y0, y1) = g.valid_range(dy, ih, oh);
            for kx in 0..k {
                let dx = kx as isize - g.pad as isize;
                let (x0, x1) = g.valid_range(dx, iw, ow);
                if x0 >= x1 {
                    continue;
                }
                let row = &cols[((i * k + ky) * k + kx) * n..][..n];
                for y in y0..y1 {
                    let iy = ((y * g.stride) as isize + dy) as usize;
                    let src = &row[y * ow + x0..y * ow + x1];
                    if g.stride == 1 {
                        let lo = iy * iw + (x0 as isize + dx) as usize;
                        for (d, &s) in plane[lo..lo + (x1 - x0)].iter_mut().zip(src) {
                            *d += s;
                        }
                    } else {
                        for (j, &s) in src.iter().enumerate() {
                            let ix = (((x0 + j) * g.stride) as isize + dx) as usize;
                            plane[iy * iw + ix] += s;
                        }
                    }
                }
            }
        }
    }
}

fn bias_backward<T: Scalar>(grad_out: &[T], shape: Shape, grad_b: &mut [f64]) {
    let plane = shape.plane();
    for (o, gb) in grad_b.iter_mut().enumerate() {
        *gb += grad_out[o * plane..(o + 1) * plane].iter().map(|v| v.to_f64()).sum::<f64>();
    }
}

fn maxpool_forward<T: Scalar>(input: &[T], is: Shape, os: Shape) -> (Vec<T>, Vec<u32>) {
    let mut out = Vec::with_capacity(os.len());
    let mut idx = Vec::with_capacity(os.len());
    for c in 0..os.channels {
        let base = c * is.plane();
        for y in 0..os.height {
            for x in 0..os.width {
                let mut best = base + 2 * y * is.width + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = base + (2 * y + dy) * is.width + 2 * x + dx;
                    if input[j] > input[best] {
                        best = j;
                    }
                }
                out.push(input[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}

fn upsample_forward<T: Scalar>(input: &[T], is: Shape, os: Shape) -> Vec<T> {
    let mut out = Vec::with_capacity(os.len());
    for c in 0..os.channels {
        for y in 0..os.height {
            let row = &input[c * is.plane() + (y / 2) * is.width..][..is.width];
            for x in 0..os.width {
                out.push(row[x / 2]);
            }
        }
    }
    out
}

fn upsample_backward<T: Scalar>(grad_out: &[T], os: Shape, grad_in: &mut [T], is: Shape) {
    for c in 0..os.channels {
        for y in 0..os.height {
            for x in 0..os.width {
                grad_in[c * is.plane() + (y / 2) * is.width + x / 2] +=
                    grad_out[c * os.plane() + y * os.width + x];
            }
        }
    }
}
