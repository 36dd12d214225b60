//! Likelihood map to scored SEP detections: Otsu split into basins and peak
//! regions, one detection per peak region at its likelihood-weighted center
//! of mass, scored by the region's mean likelihood.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{
    connected_components, otsu_threshold, weighted_centroid, BinaryMask, Connectivity,
    MultiChannelRaster, DEFAULT_OTSU_BINS,
};

/// A sub-pixel SEP estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Mean likelihood over the peak region.
    #[default]
    RegionMean,
    /// Maximum likelihood in the peak region (kept for ablations).
    RegionMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub otsu_bins: usize,
    pub connectivity: Connectivity,
    /// Regions with fewer pixels are dropped as speckle.
    pub min_region_area: usize,
    pub scoring: Scoring,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            otsu_bins: DEFAULT_OTSU_BINS,
            connectivity: Connectivity::Eight,
            min_region_area: 3,
            scoring: Scoring::RegionMean,
        }
    }
}

pub fn extract_seps(likelihood: &MultiChannelRaster) -> Result<Vec<Detection>> {
    extract_seps_with(likelihood, &ExtractConfig::default())
}

/// Detections sorted by confidence (descending), ties broken by centroid
/// `(y, x)`. A constant map has no peaks and yields no detections.
pub fn extract_seps_with(
    likelihood: &MultiChannelRaster,
    config: &ExtractConfig,
) -> Result<Vec<Detection>> {
    likelihood.require_single_channel()?;
    if likelihood.is_empty() {
        return Err(Error::InvalidArgument("empty likelihood map".into()));
    }
    // Overshooting regressor outputs are clamped so scores stay in [0, 1].
    let clamped = likelihood.map(|v| v.clamp(0.0, 1.0));
    let threshold = match otsu_threshold(&clamped, config.otsu_bins) {
        Ok(t) => t,
        Err(Error::DegenerateHistogram) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mask = BinaryMask::from_fn(clamped.width(), clamped.height(), |x, y| {
        clamped.get(x, y, 0) >= threshold
    });
    let regions = connected_components(&mask, config.connectivity);

    let mut out = Vec::with_capacity(regions.region_count());
    for region in regions.regions() {
        if region.len() < config.min_region_area {
            continue;
        }
        let (x, y) = match weighted_centroid(&region, &clamped) {
            Ok(c) => c,
            Err(Error::MasslessRegion) => continue,
            Err(e) => return Err(e),
        };
        let values = region.iter().map(|&(px, py)| clamped.get(px, py, 0) as f64);
        let confidence = match config.scoring {
            Scoring::RegionMean => values.sum::<f64>() / region.len() as f64,
            Scoring::RegionMax => values.fold(0.0, f64::max),
        };
        out.push(Detection { x, y, confidence });
    }
    out.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    Ok(out)
}

pub fn detections_to_json(dets: &[Detection]) -> Result<String> {
    Ok(serde_json::to_string_pretty(dets)?)
}

pub fn detections_from_json(s: &str) -> Result<Vec<Detection>> {
    Ok(serde_json::from_str(s)?)
}

pub fn detections_to_csv(dets: &[Detection]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "confidence"]).map_err(|e| Error::Format(e.to_string()))?;
    for d in dets {
        w.serialize((d.x, d.y, d.confidence)).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_detections(dets: &[Detection], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, detections_to_json(dets)?)?;
    Ok(())
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    detections_from_json(&fs::read_to_string(path)?)
}

/// Total order used for ranking: confidence descending.
pub fn by_confidence_desc(a: &Detection, b: &Detection) -> Ordering {
    b.confidence.total_cmp(&a.confidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundtruth::{make_groundtruth, Annotation, SepPoint, Species};

    fn gt_map(points: &[(f64, f64)], sigma: f64) -> MultiChannelRaster {
        let ann = Annotation {
            image_id: "x".into(),
            seps: points.iter().map(|&(x, y)| SepPoint { x, y, species: Species::Crop }).collect(),
            regions: vec![],
        };
        make_groundtruth(&ann, 64, 64, sigma).unwrap().likelihood
    }

    #[test]
    fn single_peak_is_found() {
        let dets = extract_seps(&gt_map(&[(20.0, 20.0)], 5.0)).unwrap();
        assert_eq!(dets.len(), 1);
        assert!((dets[0].x - 20.0).abs() < 0.5 && (dets[0].y - 20.0).abs() < 0.5, "{dets:?}");
    }

    #[test]
    fn flat_map_has_no_detections() {
        assert!(extract_seps(&MultiChannelRaster::zeros(16, 16, 1)).unwrap().is_empty());
    }

    #[test]
    fn two_symmetric_peaks() {
        let dets = extract_seps(&gt_map(&[(12.0, 30.0), (52.0, 30.0)], 5.0)).unwrap();
        assert_eq!(dets.len(), 2);
        assert!((dets[0].confidence - dets[1].confidence).abs() < 1e-5);
        let mut xs: Vec<f64> = dets.iter().map(|d| d.x).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] - 12.0).abs() < 0.5 && (xs[1] - 52.0).abs() < 0.5);
        assert!(dets.iter().all(|d| (d.y - 30.0).abs() < 0.5));
    }

    #[test]
    fn speckle_below_min_area_is_dropped() {
        let map = MultiChannelRaster::from_fn(10, 10, |x, y| if (x, y) == (4, 4) { 1.0 } else { 0.0 });
        assert!(extract_seps(&map).unwrap().is_empty());
        let cfg = ExtractConfig { min_region_area: 1, ..Default::default() };
        assert_eq!(extract_seps_with(&map, &cfg).unwrap().len(), 1);
    }

    #[test]
    fn spread_peak_scores_lower_than_compact() {
        // compact saturated blob versus a broad plateau
        let map = MultiChannelRaster::from_fn(32, 16, |x, y| {
            if (4..6).contains(&x) && (4..6).contains(&y) {
                1.0
            } else if (18..22).contains(&x) && (4..8).contains(&y) {
                0.6
            } else {
                0.0
            }
        });
        let cfg = ExtractConfig { otsu_bins: 256, ..Default::default() };
        let dets = extract_seps_with(&map, &cfg).unwrap();
        assert_eq!(dets.len(), 2, "{dets:?}");
        assert!(dets[0].x < 10.0 && dets[0].confidence > dets[1].confidence);
    }

    #[test]
    fn overshoot_is_clamped_for_scoring() {
        let map = MultiChannelRaster::from_fn(16, 16, |x, y| {
            if (6..9).contains(&x) && (6..9).contains(&y) { 1.7 } else { -0.2 }
        });
        let dets = extract_seps(&map).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].confidence, 1.0);
        assert_eq!((dets[0].x, dets[0].y), (7.0, 7.0));
    }

    #[test]
    fn json_and_csv() {
        let dets = vec![Detection { x: 1.5, y: 2.0, confidence: 0.75 }];
        let json = detections_to_json(&dets).unwrap();
        assert_eq!(detections_from_json(&json).unwrap(), dets);
        assert_eq!(detections_to_csv(&dets).unwrap(), "x,y,confidence\n1.5,2.0,0.75\n");
    }
}
