//! Pinhole projection between image pixels and the flat ground plane.

use serde::{Deserialize, Serialize};

use super::Pose2D;
use crate::error::{Error, Result};
use crate::extraction::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub focal_px: f64,
    pub principal_point: (f64, f64),
    pub height_mm: f64,
    /// Camera center in the robot-local frame.
    pub mount_offset_mm: (f64, f64),
    pub nadir: bool,
}

impl CameraConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0 && self.height_mm > 0.0) {
            return Err(Error::InvalidArgument("camera focal length and height must be positive".into()));
        }
        if !self.nadir {
            return Err(Error::InvalidArgument("only nadir cameras are supported".into()));
        }
        Ok(())
    }

    /// Ground sampling distance at the image center, mm per pixel.
    pub fn mm_per_px(&self) -> f64 {
        self.height_mm / self.focal_px
    }
}

/// World point (mm) of the ground seen at the detection's pixel.
pub fn project_detection(det: &Detection, pose: &Pose2D, cam: &CameraConfig) -> Result<(f64, f64)> {
    cam.validate()?;
    let s = cam.mm_per_px();
    let lx = cam.mount_offset_mm.0 + (det.x - cam.principal_point.0) * s;
    let ly = cam.mount_offset_mm.1 + (det.y - cam.principal_point.1) * s;
    let (sin, cos) = pose.theta.sin_cos();
    Ok((pose.x + cos * lx - sin * ly, pose.y + sin * lx + cos * ly))
}

/// Inverse of [`project_detection`]: the pixel at which a ground point
/// appears.
pub fn world_to_pixel(point: (f64, f64), pose: &Pose2D, cam: &CameraConfig) -> Result<(f64, f64)> {
    cam.validate()?;
    let (dx, dy) = (point.0 - pose.x, point.1 - pose.y);
    let (sin, cos) = pose.theta.sin_cos();
    let lx = cos * dx + sin * dy - cam.mount_offset_mm.0;
    let ly = -sin * dx + cos * dy - cam.mount_offset_mm.1;
    let s = cam.mm_per_px();
    Ok((cam.principal_point.0 + lx / s, cam.principal_point.1 + ly / s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(f: f64, h: f64) -> CameraConfig {
        CameraConfig { focal_px: f, principal_point: (320.0, 240.0), height_mm: h, mount_offset_mm: (0.0, 0.0), nadir: true }
    }

    fn det(x: f64, y: f64) -> Detection {
        Detection { x, y, confidence: 1.0 }
    }

    #[test]
    fn principal_point_lands_below_pose() {
        let p = project_detection(&det(320.0, 240.0), &Pose2D::exact(5.0, 7.0, 1.0), &cam(1000.0, 500.0)).unwrap();
        assert!((p.0 - 5.0).abs() < 1e-12 && (p.1 - 7.0).abs() < 1e-12);
    }

    #[test]
    fn similar_triangles() {
        let c = cam(1000.0, 500.0);
        let p = project_detection(&det(420.0, 240.0), &Pose2D::exact(0.0, 0.0, 0.0), &c).unwrap();
        assert!((p.0 - 50.0).abs() < 1e-12 && p.1.abs() < 1e-12);
        let q = project_detection(&det(420.0, 240.0), &Pose2D::exact(0.0, 0.0, std::f64::consts::FRAC_PI_2), &c).unwrap();
        assert!(q.0.abs() < 1e-12 && (q.1 - 50.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let mut c = cam(500.0, 1000.0);
        c.mount_offset_mm = (120.0, -30.0);
        let pose = Pose2D::exact(1234.5, -77.0, 2.5);
        let w = project_detection(&det(17.25, 40.5), &pose, &c).unwrap();
        let (x, y) = world_to_pixel(w, &pose, &c).unwrap();
        assert!((x - 17.25).abs() < 1e-9 && (y - 40.5).abs() < 1e-9);
    }

    #[test]
    fn oblique_camera_rejected() {
        let mut c = cam(500.0, 1000.0);
        c.nadir = false;
        assert!(project_detection(&det(0.0, 0.0), &Pose2D::exact(0.0, 0.0, 0.0), &c).is_err());
    }
}
