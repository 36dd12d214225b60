//! Annotations and their conversion into training targets.

mod annotation;
mod augment;

pub use annotation::{
    Annotation, AnnotationFile, EmergenceRegion, RegionRecord, SepPoint, SepRecord, Species,
};
pub use augment::{augment, mirror_horizontal, mirror_vertical, rotate_eighths, AugmentConfig};

use crate::error::{Error, Result};
use crate::raster::{distance_transform, MultiChannelRaster};

/// Default likelihood decay in pixels, the middle of the 15-19 px range that
/// works at full camera resolution.
pub const DEFAULT_SIGMA_PX: f64 = 17.0;

/// Gaussian likelihood target built from an image's SEPs.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMap {
    pub likelihood: MultiChannelRaster,
    pub sigma: f64,
    pub seps: Vec<(f64, f64)>,
}

/// Area centroid of a simple polygon (shoelace formula).
pub fn region_to_sep(polygon: &[(f64, f64)]) -> Result<(f64, f64)> {
    if polygon.len() < 3 {
        return Err(Error::DegeneratePolygon);
    }
    // Work relative to the first vertex to keep the cross products small.
    let (ox, oy) = polygon[0];
    let (mut area2, mut cx, mut cy) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..polygon.len() {
        let (x0, y0) = (polygon[i].0 - ox, polygon[i].1 - oy);
        let j = (i + 1) % polygon.len();
        let (x1, y1) = (polygon[j].0 - ox, polygon[j].1 - oy);
        let cross = x0 * y1 - x1 * y0;
        area2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    let scale = polygon
        .iter()
        .map(|&(x, y)| (x - ox).abs().max((y - oy).abs()))
        .fold(0.0f64, f64::max);
    if area2.abs() <= 1e-12 * scale.max(1.0).powi(2) {
        return Err(Error::DegeneratePolygon);
    }
    Ok((ox + cx / (3.0 * area2), oy + cy / (3.0 * area2)))
}

/// `r(x) = exp(-d(x)^2 / (2 sigma^2))` where `d` is the distance to the
/// nearest SEP (point SEPs and region centroids alike). SEPs are snapped to
/// their pixel for the distance transform.
pub fn make_groundtruth(
    annotation: &Annotation,
    width: usize,
    height: usize,
    sigma: f64,
) -> Result<GroundTruthMap> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let seps: Vec<(f64, f64)> = annotation.all_seps()?.into_iter().map(|(x, y, _)| (x, y)).collect();
    let pixels: Vec<(usize, usize)> = seps
        .iter()
        .map(|&(x, y)| (snap(x, width), snap(y, height)))
        .collect();
    let dist = distance_transform(&pixels, width, height)?;
    let denom = 2.0 * sigma * sigma;
    let likelihood = dist.map(|d| {
        let d = d as f64;
        (-(d * d) / denom).exp() as f32
    });
    Ok(GroundTruthMap { likelihood, sigma, seps })
}

/// Training target for any frame: the likelihood map, or the all-zero map
/// (every pixel infinitely far from a SEP) when the frame shows no SEP.
pub fn training_target(
    annotation: &Annotation,
    width: usize,
    height: usize,
    sigma: f64,
) -> Result<MultiChannelRaster> {
    match make_groundtruth(annotation, width, height, sigma) {
        Ok(gt) => Ok(gt.likelihood),
        Err(Error::NoSeps) => Ok(MultiChannelRaster::zeros(width, height, 1)),
        Err(e) => Err(e),
    }
}

fn snap(v: f64, extent: usize) -> usize {
    (v.round().max(0.0) as usize).min(extent.saturating_sub(1))
}
