//! Deterministic synthetic fields: plant layout, robot trajectory, rendered
//! RGB+NIR views with exact SEP annotations, and noisy sensor streams.
//!
//! All randomness comes from ChaCha8 streams derived from the configured
//! seed, so every output is a pure function of the configuration.

mod plants;
mod render;
mod sensors;
mod write;

pub use plants::{Blade, GrowthStage, Leaf, Plant, PlantForm};
pub use render::{render_view, render_views, View};
pub use sensors::{corrupt_sensors, SensorNoise, DEFAULT_GNSS_SIGMA_MM};
pub use write::{load_frames, load_view_image, write_run, FrameRecord};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomap::{normalize_angle, CameraConfig};
use crate::groundtruth::Species;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldConfig {
    /// Along the crop rows (world x).
    pub field_length_mm: f64,
    /// Across the rows (world y); holds `floor(width / row_spacing)` rows.
    pub field_width_mm: f64,
    pub row_spacing_mm: f64,
    pub plant_spacing_mm: f64,
    /// Uniform jitter of crop positions around the row grid, each axis.
    pub position_jitter_mm: f64,
    pub growth_stage: GrowthStage,
    pub weed_density_per_m2: f64,
    /// Share of weeds that are grasses (annotated by polygon).
    pub grass_fraction: f64,
    /// Minimum SEP distance between any two plants, in image pixels.
    pub min_separation_px: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub ground_resolution_mm_per_px: f64,
    pub camera_height_mm: f64,
    /// Distance driven between consecutive frames.
    pub frame_step_mm: f64,
    pub speed_mm_s: f64,
    pub rng_seed: u64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            field_length_mm: 1200.0,
            field_width_mm: 500.0,
            row_spacing_mm: 250.0,
            plant_spacing_mm: 70.0,
            position_jitter_mm: 8.0,
            growth_stage: GrowthStage::Mid,
            weed_density_per_m2: 20.0,
            grass_fraction: 0.4,
            min_separation_px: 20.0,
            image_width: 64,
            image_height: 64,
            ground_resolution_mm_per_px: 2.0,
            camera_height_mm: 1000.0,
            frame_step_mm: 110.0,
            speed_mm_s: 200.0,
            rng_seed: 0,
        }
    }
}

impl FieldConfig {
    pub fn min_separation_mm(&self) -> f64 {
        self.min_separation_px * self.ground_resolution_mm_per_px
    }

    pub fn row_count(&self) -> usize {
        (self.field_width_mm / self.row_spacing_mm).floor() as usize
    }

    pub fn plants_per_row(&self) -> usize {
        (self.field_length_mm / self.plant_spacing_mm).floor() as usize
    }

    /// Nadir camera with the configured ground resolution, principal point
    /// at the image center, mounted at the robot origin.
    pub fn camera(&self) -> CameraConfig {
        CameraConfig {
            focal_px: self.camera_height_mm / self.ground_resolution_mm_per_px,
            principal_point: ((self.image_width as f64 - 1.0) / 2.0, (self.image_height as f64 - 1.0) / 2.0),
            height_mm: self.camera_height_mm,
            mount_offset_mm: (0.0, 0.0),
            nadir: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("field_length_mm", self.field_length_mm),
            ("field_width_mm", self.field_width_mm),
            ("row_spacing_mm", self.row_spacing_mm),
            ("plant_spacing_mm", self.plant_spacing_mm),
            ("ground_resolution_mm_per_px", self.ground_resolution_mm_per_px),
            ("camera_height_mm", self.camera_height_mm),
            ("frame_step_mm", self.frame_step_mm),
            ("speed_mm_s", self.speed_mm_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::InvalidArgument("image size must be non-zero".into()));
        }
        if !(self.min_separation_px >= 20.0) {
            return Err(Error::InvalidArgument("min_separation_px must be at least 20".into()));
        }
        if !(self.position_jitter_mm >= 0.0)
            || !(self.weed_density_per_m2 >= 0.0)
            || !(0.0..=1.0).contains(&self.grass_fraction)
        {
            return Err(Error::InvalidArgument("jitter, weed density and grass fraction out of range".into()));
        }
        if self.row_count() == 0 || self.plants_per_row() == 0 {
            return Err(Error::InvalidArgument("field holds no crop row".into()));
        }
        let sep = self.min_separation_mm();
        if self.plant_spacing_mm - 2.0 * self.position_jitter_mm < sep
            || self.row_spacing_mm - 2.0 * self.position_jitter_mm < sep
        {
            return Err(Error::InvalidArgument(format!(
                "crop spacing minus jitter is below the {sep} mm minimum plant separation"
            )));
        }
        Ok(())
    }
}

/// True robot state at one frame plus the motion since the previous frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueStep {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub distance: f64,
    pub dtheta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTruth {
    pub config: FieldConfig,
    /// Appearance generation; bumping it regrows every plant in place.
    pub epoch: u32,
    pub plants: Vec<Plant>,
    pub trajectory: Vec<TrueStep>,
}

impl FieldTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Same SEPs, freshly drawn leaves and blades (a later visit).
    pub fn regrow(&self, epoch: u32) -> FieldTruth {
        let mut out = self.clone();
        out.epoch = epoch;
        for p in &mut out.plants {
            let mut rng = stream_rng(self.config.rng_seed, Stream::Appearance { epoch, id: p.id });
            p.regrow(&mut rng, self.config.growth_stage);
        }
        out
    }

    /// Removes `round(fraction * weeds)` randomly chosen weeds.
    pub fn kill_weeds(&self, fraction: f64, seed: u64) -> Result<FieldTruth> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!("weed death fraction {fraction} not in [0, 1]")));
        }
        let mut weeds: Vec<usize> = self.plants.iter().filter(|p| p.species == Species::Weed).map(|p| p.id).collect();
        let n = (fraction * weeds.len() as f64).round() as usize;
        let mut rng = stream_rng(seed, Stream::Death);
        rand::seq::SliceRandom::shuffle(weeds.as_mut_slice(), &mut rng);
        let dead: std::collections::BTreeSet<usize> = weeds.into_iter().take(n).collect();
        let mut out = self.clone();
        out.plants.retain(|p| !dead.contains(&p.id));
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Placement,
    Appearance { epoch: u32, id: usize },
    Soil { epoch: u32 },
    Frame { epoch: u32, frame: usize },
    Sensors,
    Death,
}

pub(crate) fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let id = match stream {
        Stream::Placement => 0,
        Stream::Sensors => 1,
        Stream::Death => 2,
        Stream::Soil { epoch } => (3 << 56) | epoch as u64,
        Stream::Appearance { epoch, id } => (4 << 56) | ((epoch as u64) << 28) | id as u64,
        Stream::Frame { epoch, frame } => (5 << 56) | ((epoch as u64) << 28) | frame as u64,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Lays out crops and weeds and plans the boustrophedon drive along the
/// rows.
pub fn generate_field(config: &FieldConfig) -> Result<FieldTruth> {
    config.validate()?;
    let mut rng = stream_rng(config.rng_seed, Stream::Placement);
    let mut seps: Vec<((f64, f64), Species, bool)> = Vec::new();
    let j = config.position_jitter_mm;
    for row in 0..config.row_count() {
        let y = (row as f64 + 0.5) * config.row_spacing_mm;
        for i in 0..config.plants_per_row() {
            let x = (i as f64 + 0.5) * config.plant_spacing_mm;
            let (dx, dy) = if j > 0.0 { (rng.random_range(-j..=j), rng.random_range(-j..=j)) } else { (0.0, 0.0) };
            seps.push(((x + dx, y + dy), Species::Crop, false));
        }
    }

    let area_m2 = config.field_length_mm * config.field_width_mm * 1e-6;
    let lambda = config.weed_density_per_m2 * area_m2;
    let weeds = if lambda > 0.0 {
        Poisson::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(&mut rng) as usize
    } else {
        0
    };
    let min_sep = config.min_separation_mm();
    for w in 0..weeds {
        let mut placed = false;
        for _ in 0..1000 {
            let p = (rng.random_range(0.0..config.field_length_mm), rng.random_range(0.0..config.field_width_mm));
            if seps.iter().all(|(q, _, _)| (p.0 - q.0).hypot(p.1 - q.1) >= min_sep) {
                let grass = rng.random_bool(config.grass_fraction);
                seps.push((p, Species::Weed, grass));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Placement(format!(
                "weed {w} of {weeds} violates the {min_sep} mm separation after 1000 samples"
            )));
        }
    }

    let plants = seps
        .into_iter()
        .enumerate()
        .map(|(id, (sep, species, grass))| {
            let mut arng = stream_rng(config.rng_seed, Stream::Appearance { epoch: 0, id });
            Plant::grow(id, species, sep, grass, config.growth_stage, &mut arng)
        })
        .collect();

    Ok(FieldTruth { config: config.clone(), epoch: 0, plants, trajectory: plan_trajectory(config) })
}

/// Lanes along each row (alternating direction) joined by half-circle turns,
/// with constant speed and one frame per `frame_step_mm` (rounded so each
/// lane splits into equal steps).
fn plan_trajectory(config: &FieldConfig) -> Vec<TrueStep> {
    let rows = config.row_count();
    let mut steps = Vec::new();
    let (mut x, mut y, mut theta, mut t) = (0.0, 0.5 * config.row_spacing_mm, 0.0f64, 0.0);
    steps.push(TrueStep { timestamp: t, x, y, theta, distance: 0.0, dtheta: 0.0 });
    let mut advance = |chord: f64, dtheta: f64, arc: f64, steps: &mut Vec<TrueStep>| {
        let h = theta + 0.5 * dtheta;
        x += chord * h.cos();
        y += chord * h.sin();
        theta = normalize_angle(theta + dtheta);
        t += arc / config.speed_mm_s;
        steps.push(TrueStep { timestamp: t, x, y, theta, distance: chord, dtheta });
    };
    let n = (config.field_length_mm / config.frame_step_mm).ceil().max(1.0) as usize;
    let d = config.field_length_mm / n as f64;
    for row in 0..rows {
        for _ in 0..n {
            advance(d, 0.0, d, &mut steps);
        }
        if row + 1 < rows {
            let r = 0.5 * config.row_spacing_mm;
            let m = (std::f64::consts::PI * r / config.frame_step_mm).ceil().max(1.0) as usize;
            let sign = if row % 2 == 0 { 1.0 } else { -1.0 };
            let dth = std::f64::consts::PI / m as f64;
            let chord = 2.0 * r * (0.5 * dth).sin();
            for _ in 0..m {
                advance(chord, sign * dth, r * dth, &mut steps);
            }
        }
    }
    steps
}
