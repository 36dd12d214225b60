//! Geo-referencing of detections and landmark mapping.
//!
//! World frame: planar, millimeters, headings in radians. Robot-local frame:
//! `x` forward, `y` along image rows; camera pixels map onto it without
//! mirroring (image column to local `x`, image row to local `y`).

mod averaging;
mod io;
mod landmarks;
mod projection;
mod ukf;

pub use averaging::{average_fixes, AveragingConfig};
pub use io::{
    landmarks_from_csv, landmarks_to_csv, load_landmarks, load_trajectory, save_landmarks,
    save_trajectory, trajectory_from_csv, trajectory_to_csv, TrajectoryRecord,
};
pub use landmarks::{
    auto_acceptance, build_map, compare_maps, merge_landmarks, Acceptance, ComparisonReport,
    Landmark, LandmarkMap, MatchCounts, MatchedPair, DEFAULT_MERGE_RADIUS_MM, MAX_MERGE_PASSES,
};
pub use projection::{project_detection, world_to_pixel, CameraConfig};
pub use ukf::{fuse_trajectory, sigma_weights, ukf_predict, ukf_update, UkfParams};

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// GNSS 95% radial error of the reference receiver, in millimeters.
pub const GNSS_95_MM: f64 = 7.9;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Over `(x, y, theta)`; units mm², mm·rad, rad².
    pub covariance: Matrix3<f64>,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64, covariance: Matrix3<f64>) -> Result<Self> {
        let pose = Self { x, y, theta: normalize_angle(theta), covariance };
        check_covariance(&pose.covariance)?;
        Ok(pose)
    }

    /// Certain pose (zero covariance), for ground truth and tests.
    pub fn exact(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta), covariance: Matrix3::zeros() }
    }
}

/// Eigenvalue floor below which a covariance counts as indefinite.
pub const PSD_TOLERANCE: f64 = -1e-9;

pub(crate) fn check_covariance(p: &Matrix3<f64>) -> Result<()> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::FilterDivergence("non-finite covariance".into()));
    }
    if (p - p.transpose()).amax() > 1e-9 * p.amax().max(1.0) {
        return Err(Error::FilterDivergence("asymmetric covariance".into()));
    }
    let min = SymmetricEigen::new(*p).eigenvalues.min();
    if min < PSD_TOLERANCE {
        return Err(Error::FilterDivergence(format!("covariance eigenvalue {min:e}")));
    }
    Ok(())
}

pub(crate) fn symmetrize(p: &Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssFix {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    /// Per-axis standard deviation in mm.
    pub sigma: f64,
}

/// Relative motion since the previous measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryMeasurement {
    pub timestamp: f64,
    /// Forward distance in mm.
    pub distance: f64,
    /// Heading change in rad.
    pub dtheta: f64,
    pub noise: OdometryNoise,
}

/// Odometry noise: σ per mm driven and σ per rad turned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryNoise {
    pub sigma_per_mm: f64,
    pub sigma_per_rad: f64,
}

impl Default for OdometryNoise {
    fn default() -> Self {
        Self { sigma_per_mm: 0.01, sigma_per_rad: 0.02 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_wrap_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(normalize_angle(0.25), 0.25);
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let bad = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, 1.0));
        assert!(Pose2D::new(0.0, 0.0, 0.0, bad).is_err());
        assert!(Pose2D::new(0.0, 0.0, 0.0, Matrix3::identity()).is_ok());
    }
}
