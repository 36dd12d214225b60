//! Unscented Kalman filter over `(x, y, theta)`: odometry drives the
//! prediction, GNSS fixes observe the position.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{check_covariance, normalize_angle, symmetrize, GnssFix, OdometryMeasurement, Pose2D};
use crate::error::{Error, Result};

const N: usize = 3;
const POINTS: usize = 2 * N + 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// Per-step process noise floor on each position axis, mm.
    pub floor_xy_mm: f64,
    /// Per-step process noise floor on heading, rad.
    pub floor_theta_rad: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self { alpha: 1e-3, beta: 2.0, kappa: 0.0, floor_xy_mm: 0.05, floor_theta_rad: 1e-4 }
    }
}

/// Mean and covariance weights `(wm, wc)`; index 0 is the central point.
pub fn sigma_weights(params: &UkfParams) -> ([f64; POINTS], [f64; POINTS]) {
    let n = N as f64;
    let c = params.alpha * params.alpha * (n + params.kappa);
    let lambda = c - n;
    let mut wm = [0.5 / c; POINTS];
    let mut wc = [0.5 / c; POINTS];
    wm[0] = lambda / c;
    wc[0] = lambda / c + (1.0 - params.alpha * params.alpha + params.beta);
    (wm, wc)
}

/// Sigma-point offsets from the mean, `±` columns of `sqrt(c P)`.
fn sigma_offsets(cov: &Matrix3<f64>, params: &UkfParams) -> Result<[Vector3<f64>; POINTS]> {
    let c = params.alpha * params.alpha * (N as f64 + params.kappa);
    let s = matrix_sqrt(&(cov * c))?;
    let mut out = [Vector3::zeros(); POINTS];
    for i in 0..N {
        out[1 + i] = s.column(i).into_owned();
        out[1 + N + i] = -s.column(i);
    }
    Ok(out)
}

/// Lower Cholesky factor, or `V sqrt(Λ)` for singular PSD matrices.
fn matrix_sqrt(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    if let Some(ch) = m.cholesky() {
        return Ok(ch.l());
    }
    let eig = SymmetricEigen::new(*m);
    if eig.eigenvalues.min() < super::PSD_TOLERANCE {
        return Err(Error::FilterDivergence("covariance is not positive semi-definite".into()));
    }
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix3::from_diagonal(&root))
}

fn motion(s: &Vector3<f64>, d: f64, dtheta: f64) -> Vector3<f64> {
    let h = s[2] + 0.5 * dtheta;
    Vector3::new(s[0] + d * h.cos(), s[1] + d * h.sin(), s[2] + dtheta)
}

fn process_noise(theta: f64, odom: &OdometryMeasurement, params: &UkfParams) -> Matrix3<f64> {
    let h = theta + 0.5 * odom.dtheta;
    let d = odom.distance;
    let j = Matrix3x2::new(h.cos(), -0.5 * d * h.sin(), h.sin(), 0.5 * d * h.cos(), 0.0, 1.0);
    let sd = odom.noise.sigma_per_mm * d.abs();
    let st = odom.noise.sigma_per_rad * odom.dtheta.abs();
    let q = j * Matrix2::new(sd * sd, 0.0, 0.0, st * st) * j.transpose();
    let fxy = params.floor_xy_mm * params.floor_xy_mm;
    let ft = params.floor_theta_rad * params.floor_theta_rad;
    q + Matrix3::from_diagonal(&Vector3::new(fxy, fxy, ft))
}

fn state(p: &Pose2D) -> Vector3<f64> {
    Vector3::new(p.x, p.y, p.theta)
}

pub fn ukf_predict(pose: &Pose2D, odom: &OdometryMeasurement, params: &UkfParams) -> Result<Pose2D> {
    let (wm, wc) = sigma_weights(params);
    let offsets = sigma_offsets(&pose.covariance, params)?;
    let x0 = state(pose);
    let y0 = motion(&x0, odom.distance, odom.dtheta);
    // Deviations are taken relative to the propagated central point; with a
    // tiny alpha this avoids cancelling the huge central weight.
    let mut dev = [Vector3::zeros(); POINTS];
    for i in 1..POINTS {
        let mut d = motion(&(x0 + offsets[i]), odom.distance, odom.dtheta) - y0;
        d[2] = normalize_angle(d[2]);
        dev[i] = d;
    }
    let mean_dev: Vector3<f64> = (1..POINTS).map(|i| dev[i] * wm[i]).sum();
    let mut cov = Matrix3::zeros();
    for i in 0..POINTS {
        let e = dev[i] - mean_dev;
        cov += e * e.transpose() * wc[i];
    }
    let mean = y0 + mean_dev;
    cov = symmetrize(&(cov + process_noise(pose.theta, odom, params)));
    check_covariance(&cov)?;
    Ok(Pose2D { x: mean[0], y: mean[1], theta: normalize_angle(mean[2]), covariance: cov })
}

pub fn ukf_update(pose: &Pose2D, fix: &GnssFix, params: &UkfParams) -> Result<Pose2D> {
    if !(fix.sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("fix sigma must be positive, got {}", fix.sigma)));
    }
    let (wm, wc) = sigma_weights(params);
    let offsets = sigma_offsets(&pose.covariance, params)?;
    // h(x) = (x, y) evaluated on the offsets directly.
    let zdev: Vec<Vector2<f64>> = offsets.iter().map(|o| Vector2::new(o[0], o[1])).collect();
    let zmean: Vector2<f64> = (1..POINTS).map(|i| zdev[i] * wm[i]).sum();
    let xmean: Vector3<f64> = (1..POINTS).map(|i| offsets[i] * wm[i]).sum();
    let mut pzz = Matrix2::identity() * (fix.sigma * fix.sigma);
    let mut pxz = Matrix3x2::zeros();
    for i in 0..POINTS {
        let ez = zdev[i] - zmean;
        let ex = offsets[i] - xmean;
        pzz += ez * ez.transpose() * wc[i];
        pxz += ex * ez.transpose() * wc[i];
    }
    let pzz_inv = pzz
        .try_inverse()
        .ok_or_else(|| Error::FilterDivergence("singular innovation covariance".into()))?;
    let k = pxz * pzz_inv;
    let predicted = Vector2::new(pose.x, pose.y) + zmean;
    let innovation = Vector2::new(fix.x, fix.y) - predicted;
    let mean = state(pose) + xmean + k * innovation;
    let cov = symmetrize(&(pose.covariance - k * pzz * k.transpose()));
    check_covariance(&cov)?;
    Ok(Pose2D { x: mean[0], y: mean[1], theta: normalize_angle(mean[2]), covariance: cov })
}

/// Runs the filter over a trajectory. Returns one pose per odometry
/// measurement, after its prediction and after every fix stamped at or
/// before it. Fixes stamped before the first odometry sample update `initial`.
pub fn fuse_trajectory(
    initial: Pose2D,
    odometry: &[OdometryMeasurement],
    fixes: &[GnssFix],
    params: &UkfParams,
) -> Result<Vec<Pose2D>> {
    let mut pose = initial;
    let mut next_fix = 0;
    let mut out = Vec::with_capacity(odometry.len());
    for odom in odometry {
        pose = ukf_predict(&pose, odom, params)?;
        while next_fix < fixes.len() && fixes[next_fix].timestamp <= odom.timestamp {
            pose = ukf_update(&pose, &fixes[next_fix], params)?;
            next_fix += 1;
        }
        out.push(pose);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomap::OdometryNoise;

    fn odom(d: f64, dt: f64) -> OdometryMeasurement {
        OdometryMeasurement { timestamp: 0.0, distance: d, dtheta: dt, noise: OdometryNoise::default() }
    }

    #[test]
    fn weights_sum_to_one() {
        let (wm, _) = sigma_weights(&UkfParams::default());
        assert!((wm.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_motion_adds_floor_only() {
        let params = UkfParams::default();
        let p = Pose2D::new(10.0, -4.0, 0.3, Matrix3::identity() * 4.0).unwrap();
        let q = ukf_predict(&p, &odom(0.0, 0.0), &params).unwrap();
        assert!((q.x - 10.0).abs() < 1e-12 && (q.y + 4.0).abs() < 1e-12 && (q.theta - 0.3).abs() < 1e-12);
        let grow = q.covariance - p.covariance;
        let f = params.floor_xy_mm.powi(2);
        let expected = Matrix3::from_diagonal(&Vector3::new(f, f, params.floor_theta_rad.powi(2)));
        assert!((grow - expected).amax() < 1e-9, "{grow}");
    }

    #[test]
    fn straight_motion_moves_along_heading() {
        let p = Pose2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_2, Matrix3::identity() * 1e-4).unwrap();
        let q = ukf_predict(&p, &odom(100.0, 0.0), &UkfParams::default()).unwrap();
        // E[cos] shrinks by sigma_theta^2 / 2 to second order
        assert!(q.x.abs() < 1e-6 && (q.y - 100.0 * (1.0 - 0.5e-4)).abs() < 1e-6, "{q:?}");
    }

    #[test]
    fn update_pulls_towards_fix_and_shrinks() {
        let p = Pose2D::new(0.0, 0.0, 0.0, Matrix3::from_diagonal(&Vector3::new(16.0, 16.0, 0.01))).unwrap();
        let fix = GnssFix { timestamp: 0.0, x: 4.0, y: 0.0, sigma: 4.0 };
        let q = ukf_update(&p, &fix, &UkfParams::default()).unwrap();
        assert!((q.x - 2.0).abs() < 1e-9, "{}", q.x);
        assert!((q.covariance[(0, 0)] - 8.0).abs() < 1e-9);
    }

    #[test]
    fn indefinite_input_is_divergence() {
        let mut p = Pose2D::exact(0.0, 0.0, 0.0);
        p.covariance[(0, 0)] = -1.0;
        assert!(matches!(
            ukf_predict(&p, &odom(1.0, 0.0), &UkfParams::default()),
            Err(Error::FilterDivergence(_))
        ));
    }
}
