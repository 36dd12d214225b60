//! Averaging of GNSS fixes over stretches of constant robot motion.

use serde::{Deserialize, Serialize};

use super::{GnssFix, OdometryMeasurement};
use crate::error::{Error, Result};

/// Windows are maximal runs of consecutive fixes (greedy from the earliest)
/// during which the odometry speed is steady:
/// `std(speed) <= speed_rel_tol * |mean(speed)| + speed_abs_tol_mm_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AveragingConfig {
    pub max_window: usize,
    /// Shorter runs are passed through unchanged.
    pub min_window: usize,
    pub speed_rel_tol: f64,
    pub speed_abs_tol_mm_s: f64,
}

impl Default for AveragingConfig {
    fn default() -> Self {
        Self { max_window: 10, min_window: 3, speed_rel_tol: 0.1, speed_abs_tol_mm_s: 1.0 }
    }
}

/// Dead-reckoned robot-local track, one entry per odometry timestamp.
struct Track {
    times: Vec<f64>,
    poses: Vec<(f64, f64)>,
    /// `(start, end, speed)` per odometry interval with known start.
    speeds: Vec<(f64, f64, f64)>,
}

impl Track {
    fn new(odometry: &[OdometryMeasurement]) -> Self {
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
        let mut times = Vec::with_capacity(odometry.len());
        let mut poses = Vec::with_capacity(odometry.len());
        let mut speeds = Vec::new();
        for (k, o) in odometry.iter().enumerate() {
            let h = th + 0.5 * o.dtheta;
            x += o.distance * h.cos();
            y += o.distance * h.sin();
            th += o.dtheta;
            times.push(o.timestamp);
            poses.push((x, y));
            if k > 0 {
                let dt = o.timestamp - odometry[k - 1].timestamp;
                if dt > 0.0 {
                    speeds.push((odometry[k - 1].timestamp, o.timestamp, o.distance / dt));
                }
            }
        }
        Self { times, poses, speeds }
    }

    fn at(&self, t: f64) -> (f64, f64) {
        match self.times.partition_point(|&s| s <= t) {
            0 => (0.0, 0.0),
            k => self.poses[k - 1],
        }
    }

    fn steady(&self, t0: f64, t1: f64, cfg: &AveragingConfig) -> bool {
        let v: Vec<f64> = self
            .speeds
            .iter()
            .filter(|&&(s, e, _)| s >= t0 && e <= t1)
            .map(|&(_, _, v)| v)
            .collect();
        if v.is_empty() {
            return true;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() <= cfg.speed_rel_tol * mean.abs() + cfg.speed_abs_tol_mm_s
    }
}

/// Inside a steady window every fix is replaced by the running mean of the
/// window's fixes up to it, each shifted to its time by the dead-reckoned
/// displacement (rotated into the world frame by the best-fit rotation
/// between the odometry track and the fixes). The k-th running mean carries
/// `sqrt(sum sigma²) / k`. A window without motion collapses to its last
/// running mean.
pub fn average_fixes(
    fixes: &[GnssFix],
    odometry: &[OdometryMeasurement],
    config: &AveragingConfig,
) -> Result<Vec<GnssFix>> {
    if config.min_window == 0 || config.max_window < config.min_window {
        return Err(Error::InvalidArgument("averaging window bounds".into()));
    }
    if fixes.windows(2).any(|w| w[1].timestamp < w[0].timestamp)
        || odometry.windows(2).any(|w| w[1].timestamp < w[0].timestamp)
    {
        return Err(Error::InvalidArgument("fixes and odometry must be time-sorted".into()));
    }
    let track = Track::new(odometry);
    let mut out = Vec::new();
    let mut i = 0;
    while i < fixes.len() {
        let mut j = i;
        while j + 1 < fixes.len()
            && j + 1 - i < config.max_window
            && track.steady(fixes[i].timestamp, fixes[j + 1].timestamp, config)
        {
            j += 1;
        }
        if j + 1 - i >= config.min_window {
            average_window(&fixes[i..=j], &track, &mut out);
            i = j + 1;
        } else {
            out.push(fixes[i]);
            i += 1;
        }
    }
    Ok(out)
}

fn average_window(window: &[GnssFix], track: &Track, out: &mut Vec<GnssFix>) {
    let q: Vec<(f64, f64)> = window.iter().map(|f| track.at(f.timestamp)).collect();
    let (qx, qy) = mean(&q);
    let (px, py) = mean(&window.iter().map(|f| (f.x, f.y)).collect::<Vec<_>>());
    let (mut sin_acc, mut cos_acc, mut spread) = (0.0, 0.0, 0.0);
    for (f, &(x, y)) in window.iter().zip(&q) {
        let (ax, ay) = (x - qx, y - qy);
        let (bx, by) = (f.x - px, f.y - py);
        cos_acc += ax * bx + ay * by;
        sin_acc += ax * by - ay * bx;
        spread += ax * ax + ay * ay;
    }
    // Below 1 mm of travel the rotation is meaningless and irrelevant.
    let phi = if spread < 1.0 { 0.0 } else { sin_acc.atan2(cos_acc) };
    let (s, c) = phi.sin_cos();
    let moved = q.iter().any(|&p| p != q[0]);
    for (k, (fk, &qk)) in window.iter().zip(&q).enumerate() {
        if !moved && k + 1 < window.len() {
            continue;
        }
        let (mut sx, mut sy, mut var) = (0.0, 0.0, 0.0);
        for (f, &(x, y)) in window[..=k].iter().zip(&q) {
            let (dx, dy) = (qk.0 - x, qk.1 - y);
            sx += f.x + c * dx - s * dy;
            sy += f.y + s * dx + c * dy;
            var += f.sigma * f.sigma;
        }
        let n = (k + 1) as f64;
        out.push(GnssFix { timestamp: fk.timestamp, x: sx / n, y: sy / n, sigma: var.sqrt() / n });
    }
}

fn mean(v: &[(f64, f64)]) -> (f64, f64) {
    let n = v.len() as f64;
    let (sx, sy) = v.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    (sx / n, sy / n)
}
