//! Noisy GNSS and odometry streams from the true trajectory.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{stream_rng, Stream, TrueStep};
use crate::error::{Error, Result};
use crate::geomap::{OdometryNoise, TrajectoryRecord};

/// Per-axis σ whose isotropic 2-D Gaussian has its 95% radial quantile at
/// 7.9 mm: `7.9 / sqrt(-2 ln 0.05)`.
pub const DEFAULT_GNSS_SIGMA_MM: f64 = 3.227457962963716;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoise {
    /// Per-axis GNSS standard deviation, mm.
    pub gnss_sigma_mm: f64,
    pub odometry: OdometryNoise,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self { gnss_sigma_mm: DEFAULT_GNSS_SIGMA_MM, odometry: OdometryNoise::default() }
    }
}

impl SensorNoise {
    /// Per-axis σ for a given 95% radial error.
    pub fn sigma_for_radial_95(q95: f64) -> f64 {
        q95 / (-2.0 * 0.05f64.ln()).sqrt()
    }
}

/// One record per trajectory step, each with a fix. Odometry noise is
/// `N(0, (k_d |d|)²)` on distance and `N(0, (k_θ |Δθ|)²)` on heading change.
pub fn corrupt_sensors(trajectory: &[TrueStep], noise: &SensorNoise, seed: u64) -> Result<Vec<TrajectoryRecord>> {
    let k = noise.odometry;
    if !(noise.gnss_sigma_mm >= 0.0 && k.sigma_per_mm >= 0.0 && k.sigma_per_rad >= 0.0) {
        return Err(Error::InvalidArgument("noise levels must be non-negative".into()));
    }
    let gauss = |s: f64| Normal::new(0.0, s).map_err(|e| Error::InvalidArgument(e.to_string()));
    let gnss = gauss(noise.gnss_sigma_mm)?;
    let mut rng = stream_rng(seed, Stream::Sensors);
    let mut out = Vec::with_capacity(trajectory.len());
    for s in trajectory {
        let d = s.distance + gauss(k.sigma_per_mm * s.distance.abs())?.sample(&mut rng);
        let dt = s.dtheta + gauss(k.sigma_per_rad * s.dtheta.abs())?.sample(&mut rng);
        out.push(TrajectoryRecord {
            timestamp: s.timestamp,
            odo_dist_mm: d,
            odo_dtheta_rad: dt,
            gnss_x_mm: Some(s.x + gnss.sample(&mut rng)),
            gnss_y_mm: Some(s.y + gnss.sample(&mut rng)),
            gnss_sigma_mm: Some(noise.gnss_sigma_mm),
        });
    }
    Ok(out)
}
