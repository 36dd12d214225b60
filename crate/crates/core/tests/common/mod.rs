//! Independent reference implementations and random instance generators
//! shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seploc::fcnn::{backward, forward_with, Layer, LayerKind, Network, Shape, Tensor};
use seploc::geomap::{Landmark, LandmarkMap};
use seploc::groundtruth::{Annotation, EmergenceRegion, SepPoint, Species};
use seploc::raster::MultiChannelRaster;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Distance from every pixel to every point, keeping the minimum.
pub fn brute_edt(points: &[(usize, usize)], width: usize, height: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let best = points
                .iter()
                .map(|&(px, py)| {
                    let dx = x as f64 - px as f64;
                    let dy = y as f64 - py as f64;
                    dx * dx + dy * dy
                })
                .fold(f64::INFINITY, f64::min);
            out.push(best.sqrt() as f32);
        }
    }
    out
}

/// Otsu by trying every split of the histogram and scoring it from the
/// pixel list directly. Returns the upper edge of the best background bin.
pub fn exhaustive_otsu(values: &[f32], bins: usize) -> Option<f32> {
    let lo = values.iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = values.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    if lo >= hi {
        return None;
    }
    let bin = |v: f32| {
        let t = ((v as f64 - lo as f64) / (hi as f64 - lo as f64) * bins as f64).floor();
        (t.max(0.0) as usize).min(bins - 1)
    };
    let idx: Vec<usize> = values.iter().map(|&v| bin(v)).collect();
    let mut best: Option<(usize, f64)> = None;
    for k in 0..bins - 1 {
        let (back, fore): (Vec<f64>, Vec<f64>) = {
            let mut b = Vec::new();
            let mut f = Vec::new();
            for &i in &idx {
                if i <= k {
                    b.push(i as f64)
                } else {
                    f.push(i as f64)
                }
            }
            (b, f)
        };
        if back.is_empty() || fore.is_empty() {
            continue;
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (w0, w1) = (back.len() as f64, fore.len() as f64);
        let score = w0 * w1 * (mean(&back) - mean(&fore)).powi(2);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((k, score));
        }
    }
    let (k, _) = best?;
    Some((lo as f64 + (k + 1) as f64 * (hi as f64 - lo as f64) / bins as f64) as f32)
}

/// Multiple of `2^-bits` in `[-1, 1]`; perturbations by powers of two above
/// that grid stay exact in `f32`.
pub fn grid_value(rng: &mut ChaCha8Rng, bits: i32) -> f32 {
    let scale = (1i64 << bits) as f64;
    (rng.random_range(-(1i64 << bits)..=(1i64 << bits)) as f64 / scale) as f32
}

fn conv(cin: usize, cout: usize, k: usize) -> Layer {
    Layer::conv(cin, cout, k)
}

/// Random net of one to three convolutions (one may be multiscale) on 8x8
/// inputs with one output channel. Parameters lie on a `2^-12` grid.
pub fn random_net(rng: &mut ChaCha8Rng) -> Network {
    let cin = rng.random_range(1..=3);
    let k = |rng: &mut ChaCha8Rng| [1, 3, 5][rng.random_range(0..3)];
    let mid = rng.random_range(1..=4);
    let layers = match rng.random_range(0..4) {
        0 => vec![conv(cin, 1, k(rng))],
        1 => vec![conv(cin, mid, k(rng)), Layer::new(LayerKind::Relu), conv(mid, 1, k(rng))],
        2 => vec![
            conv(cin, mid, k(rng)),
            Layer::new(LayerKind::Relu),
            Layer::new(LayerKind::Downsample2),
            Layer::multiscale(mid, mid, 1, 3),
            Layer::new(LayerKind::Relu),
            Layer::new(LayerKind::Upsample2),
            conv(mid, 1, k(rng)),
        ],
        _ => vec![
            conv(cin, mid, k(rng)),
            Layer::new(LayerKind::Relu),
            conv(mid, mid, k(rng)),
            Layer::new(LayerKind::SkipAdd { from: 1 }),
            Layer::new(LayerKind::Relu),
            conv(mid, 1, k(rng)),
        ],
    };
    let mut net = Network::new(cin, layers).expect("valid architecture");
    for layer in &mut net.layers {
        for p in &mut layer.params {
            *p = grid_value(rng, 12) * 0.5;
        }
    }
    net
}

pub fn random_tensor(rng: &mut ChaCha8Rng, channels: usize, height: usize, width: usize) -> Tensor {
    let shape = Shape::new(channels, height, width);
    let data = (0..shape.len()).map(|_| rng.random_range(0..=256) as f32 / 256.0).collect();
    Tensor::new(shape, data).expect("finite")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheck {
    pub checked: usize,
    /// Weights whose stencil crossed a ReLU or pooling kink.
    pub skipped: usize,
    pub max_rel_error: f64,
}

/// Analytic gradients against central differences. With the activation
/// pattern fixed the loss is exactly quadratic in any single weight, so the
/// `h` and `2h` stencils agree unless a kink lies inside; those weights are
/// skipped.
pub fn gradient_check(net: &Network, input: &Tensor, target: &Tensor) -> GradCheck {
    let (_, grads) = backward::<f64>(net, input, target).expect("backward");
    let loss = |n: &Network| {
        let out = forward_with::<f64>(n, input).expect("forward");
        out.iter().zip(target.data()).map(|(&o, &t)| (t as f64 - o).powi(2)).sum::<f64>()
    };
    let h = 1.0f64 / 1024.0;
    let mut report = GradCheck::default();
    let mut probe = net.clone();
    for (li, layer) in net.layers.iter().enumerate() {
        for (pi, &p) in layer.params.iter().enumerate() {
            let mut at = |delta: f64| {
                probe.layers[li].params[pi] = (p as f64 + delta) as f32;
                let v = loss(&probe);
                probe.layers[li].params[pi] = p;
                v
            };
            let d1 = (at(h) - at(-h)) / (2.0 * h);
            let d2 = (at(2.0 * h) - at(-2.0 * h)) / (4.0 * h);
            if (d1 - d2).abs() > 1e-7 * d1.abs().max(1.0) {
                report.skipped += 1;
                continue;
            }
            let a = grads.layers[li][pi];
            let rel = (a - d1).abs() / a.abs().max(d1.abs()).max(1e-6);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    report
}

/// Closed-form Kalman filter for a planar point moving along +x by known
/// distances, observed directly.
pub struct LinearKf {
    pub x: Vector2<f64>,
    pub p: Matrix2<f64>,
}

impl LinearKf {
    pub fn predict(&mut self, d: f64, q: Matrix2<f64>) {
        self.x += Vector2::new(d, 0.0);
        self.p += q;
    }

    pub fn update(&mut self, z: Vector2<f64>, sigma: f64) {
        let s = self.p + Matrix2::identity() * sigma * sigma;
        let k = self.p * s.try_inverse().expect("invertible");
        self.x += k * (z - self.x);
        self.p = (Matrix2::identity() - k) * self.p;
    }
}

/// Union-find clustering of all pairs closer than `radius`.
pub fn transitive_clusters(points: &[(f64, f64)], radius: f64) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1) < radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..points.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Greedy confidence-ordered matching written out directly: detections in
/// descending confidence (stable), each taking its nearest free ground
/// truth within the threshold.
pub fn greedy_match(dets: &[(f64, f64, f64)], gts: &[(f64, f64)], threshold: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].2.partial_cmp(&dets[a].2).unwrap());
    let mut taken = vec![false; gts.len()];
    let mut out = vec![None; dets.len()];
    for i in order {
        let mut best: Option<(f64, usize)> = None;
        for (j, g) in gts.iter().enumerate() {
            let d = ((dets[i].0 - g.0).powi(2) + (dets[i].1 - g.1).powi(2)).sqrt();
            if !taken[j] && d <= threshold && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        if let Some((_, j)) = best {
            taken[j] = true;
            out[i] = Some(j);
        }
    }
    out
}

pub fn random_raster(rng: &mut ChaCha8Rng) -> MultiChannelRaster {
    let (w, h) = (rng.random_range(1..=40), rng.random_range(1..=40));
    let data = (0..w * h)
        .map(|_| loop {
            let v = f32::from_bits(rng.random());
            if v.is_finite() {
                break v;
            }
        })
        .collect();
    MultiChannelRaster::new(w, h, 1, data).expect("finite")
}

pub fn random_annotation(rng: &mut ChaCha8Rng, id: usize) -> Annotation {
    let species = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { Species::Crop } else { Species::Weed };
    let seps = (0..rng.random_range(0..6))
        .map(|_| SepPoint { x: rng.random_range(0.0..64.0), y: rng.random_range(0.0..64.0), species: species(rng) })
        .collect();
    let regions = (0..rng.random_range(0..3))
        .map(|_| {
            let (cx, cy) = (rng.random_range(10.0..54.0), rng.random_range(10.0..54.0));
            let r = rng.random_range(2.0..8.0);
            let polygon = (0..rng.random_range(3..8))
                .map(|k| {
                    let a = k as f64 * 0.9;
                    (cx + r * a.cos(), cy + r * a.sin())
                })
                .collect();
            EmergenceRegion { polygon, species: species(rng) }
        })
        .collect();
    Annotation { image_id: format!("img_{id:04}"), seps, regions }
}

pub fn random_landmark_map(rng: &mut ChaCha8Rng, id: usize) -> LandmarkMap {
    let landmarks = (0..rng.random_range(0..40))
        .map(|_| Landmark {
            x: rng.random_range(-5000.0..5000.0),
            y: rng.random_range(-5000.0..5000.0),
            confidence: rng.random_range(0.0..1.0),
            observations: rng.random_range(1..20),
        })
        .collect();
    LandmarkMap { run_id: format!("run{id}"), date_tag: format!("2017-05-{:02}", 1 + id % 28), landmarks }
}
