//! Pipeline configuration. Every section has defaults, so a config file only
//! needs the keys it changes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_ACCEPTANCE_PX;
use crate::extraction::{ExtractConfig, Scoring};
use crate::fcnn::TrainConfig;
use crate::geomap::{
    Acceptance, AveragingConfig, CameraConfig, OdometryNoise, UkfParams, DEFAULT_MERGE_RADIUS_MM,
};
use crate::groundtruth::{Species, DEFAULT_SIGMA_PX};
use crate::raster::DEFAULT_OTSU_BINS;
use crate::synthfield::{FieldConfig, SensorNoise};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; field, sensor, shuffling and initialization seeds derive
    /// from it.
    pub seed: u64,
    pub field: FieldConfig,
    pub noise: SensorNoise,
    pub groundtruth: GroundTruthSection,
    pub train: TrainSection,
    pub extract: ExtractSection,
    pub eval: EvalSection,
    pub map: MapSection,
    pub compare: CompareSection,
    pub e2e: E2eSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTruthSection {
    pub sigma_px: f64,
}

impl Default for GroundTruthSection {
    fn default() -> Self {
        Self { sigma_px: DEFAULT_SIGMA_PX }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub momentum: f64,
    /// Adds the rotated, mirrored and cropped variants of every image.
    pub augment: bool,
    pub crop_count: usize,
    /// Use at most this many images (in run order).
    pub max_images: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            learning_rate: 3e-5,
            batch_size: 4,
            iterations: 2000,
            momentum: 0.9,
            augment: false,
            crop_count: 4,
            max_images: None,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            iterations: self.iterations,
            momentum: self.momentum,
            rng_seed: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    pub otsu_bins: usize,
    pub min_region_area: usize,
    pub scoring: Scoring,
}

impl Default for ExtractSection {
    fn default() -> Self {
        Self { otsu_bins: DEFAULT_OTSU_BINS, min_region_area: 3, scoring: Scoring::RegionMean }
    }
}

impl ExtractSection {
    pub fn to_extract_config(&self) -> ExtractConfig {
        ExtractConfig {
            otsu_bins: self.otsu_bins,
            min_region_area: self.min_region_area,
            scoring: self.scoring,
            ..ExtractConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub thresholds_px: Vec<f64>,
    pub acceptance_px: f64,
    /// Restrict ground truth to one species.
    pub species: Option<Species>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { thresholds_px: parse_thresholds("6:18:2").expect("valid"), acceptance_px: DEFAULT_ACCEPTANCE_PX, species: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub merge_radius_mm: f64,
    pub average_fixes: bool,
    pub averaging: AveragingConfig,
    pub ukf: UkfParams,
    pub odometry: OdometryNoise,
    /// Initial heading standard deviation, rad.
    pub initial_heading_sigma_rad: f64,
    /// Detections closer than this to the image border are not mapped.
    pub border_margin_px: f64,
    /// Defaults to the camera implied by the field section.
    pub camera: Option<CameraConfig>,
}

impl Default for MapSection {
    fn default() -> Self {
        Self {
            merge_radius_mm: DEFAULT_MERGE_RADIUS_MM,
            average_fixes: true,
            averaging: AveragingConfig::default(),
            ukf: UkfParams::default(),
            odometry: OdometryNoise::default(),
            initial_heading_sigma_rad: 0.2,
            border_margin_px: 4.0,
            camera: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// `"auto"` (three sigma of the nearest-neighbor distances) or a
    /// distance in mm.
    pub acceptance: String,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { acceptance: "auto".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E2eSection {
    pub train_images: usize,
    pub test_images: usize,
    /// Likelihood σ for the 64 px benchmark images.
    pub sigma_px: f64,
    /// Detection threshold of the benchmark AP.
    pub threshold_px: f64,
    /// Weeds removed between the two mapping runs.
    pub weed_death_fraction: f64,
    /// Extent of every benchmark field; replaces the field section's.
    pub field_length_mm: f64,
    pub field_width_mm: f64,
}

impl Default for E2eSection {
    fn default() -> Self {
        Self {
            train_images: 200,
            test_images: 50,
            sigma_px: 4.0,
            threshold_px: 6.0,
            weed_death_fraction: 0.0,
            field_length_mm: 3000.0,
            field_width_mm: 1000.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        let positive = [
            ("groundtruth.sigma_px", self.groundtruth.sigma_px),
            ("eval.acceptance_px", self.eval.acceptance_px),
            ("map.merge_radius_mm", self.map.merge_radius_mm),
            ("e2e.sigma_px", self.e2e.sigma_px),
            ("e2e.threshold_px", self.e2e.threshold_px),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.train.learning_rate >= 0.0) || self.train.batch_size == 0 {
            return Err(Error::InvalidArgument("train.learning_rate must be >= 0 and batch_size >= 1".into()));
        }
        if self.eval.thresholds_px.is_empty() || self.eval.thresholds_px.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument("eval.thresholds_px must be non-empty and positive".into()));
        }
        if !(0.0..=1.0).contains(&self.e2e.weed_death_fraction) {
            return Err(Error::InvalidArgument("e2e.weed_death_fraction must be in [0, 1]".into()));
        }
        parse_acceptance(&self.compare.acceptance)?;
        Ok(())
    }

    pub fn camera(&self) -> CameraConfig {
        self.map.camera.unwrap_or_else(|| self.field.camera())
    }
}

/// `start:stop:step` (inclusive) or a comma-separated list, in pixels.
pub fn parse_thresholds(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("bad threshold list `{spec}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + step * i as f64).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
        return Err(bad());
    }
    Ok(values)
}

pub fn parse_acceptance(spec: &str) -> Result<Acceptance> {
    match spec.trim() {
        "auto" | "auto-3sigma" => Ok(Acceptance::Auto3Sigma),
        s => match s.parse::<f64>() {
            Ok(v) if v > 0.0 => Ok(Acceptance::Fixed(v)),
            _ => Err(Error::InvalidArgument(format!("acceptance must be `auto` or a positive distance, got `{s}`"))),
        },
    }
}
