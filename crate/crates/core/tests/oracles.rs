mod common;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use seploc::eval::match_detections;
use seploc::extraction::Detection;
use seploc::geomap::{average_fixes, merge_landmarks, AveragingConfig, GnssFix, Landmark, OdometryMeasurement, OdometryNoise};

#[test]
fn matching_agrees_with_direct_greedy() {
    let mut rng = common::rng(11);
    for _ in 0..1000 {
        let n_det = rng.random_range(0..25);
        let n_gt = rng.random_range(1..25);
        let dets: Vec<(f64, f64, f64)> = (0..n_det)
            .map(|_| (rng.random_range(0.0..64.0), rng.random_range(0.0..64.0), rng.random_range(0.0..1.0)))
            .collect();
        let gts: Vec<(f64, f64)> = (0..n_gt).map(|_| (rng.random_range(0.0..64.0), rng.random_range(0.0..64.0))).collect();
        let threshold = rng.random_range(1.0..12.0);
        let d: Vec<Detection> = dets.iter().map(|&(x, y, confidence)| Detection { x, y, confidence }).collect();
        let got: Vec<Option<usize>> =
            match_detections(&d, &gts, threshold).unwrap().detections.iter().map(|m| m.gt).collect();
        assert_eq!(got, common::greedy_match(&dets, &gts, threshold));
    }
}

#[test]
fn well_separated_clusters_merge_like_transitive_closure() {
    let mut rng = common::rng(12);
    let radius = 10.0;
    for _ in 0..200 {
        // Cluster centers on a coarse grid, members within a disc of
        // diameter < radius, clusters more than 2 * radius apart.
        let mut points = Vec::new();
        let mut confs = Vec::new();
        for cx in 0..rng.random_range(1..6) {
            for cy in 0..rng.random_range(1..6) {
                let center = (cx as f64 * 40.0, cy as f64 * 40.0);
                for _ in 0..rng.random_range(1..6) {
                    let r = rng.random_range(0.0..4.9);
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    points.push((center.0 + r * a.cos(), center.1 + r * a.sin()));
                    confs.push(rng.random_range(0.05..1.0));
                }
            }
        }
        let marks: Vec<Landmark> = points
            .iter()
            .zip(&confs)
            .map(|(&(x, y), &confidence)| Landmark { x, y, confidence, observations: 1 })
            .collect();
        let merged = merge_landmarks(marks, radius).unwrap();
        let clusters = common::transitive_clusters(&points, radius);
        assert_eq!(merged.len(), clusters.len());
        for c in clusters {
            let w: f64 = c.iter().map(|&i| confs[i]).sum();
            let x = c.iter().map(|&i| points[i].0 * confs[i]).sum::<f64>() / w;
            let y = c.iter().map(|&i| points[i].1 * confs[i]).sum::<f64>() / w;
            let m = merged
                .iter()
                .find(|m| (m.x - x).hypot(m.y - y) < 1e-9)
                .unwrap_or_else(|| panic!("no landmark at ({x}, {y})"));
            assert_eq!(m.observations as usize, c.len());
            assert!((m.confidence - w / c.len() as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn averaging_reduces_error_on_steady_drive() {
    let mut rng = common::rng(13);
    let noise = Normal::new(0.0, 3.0).unwrap();
    let (speed, heading) = (200.0, 0.7f64);
    let odometry: Vec<OdometryMeasurement> = (0..60)
        .map(|k| OdometryMeasurement {
            timestamp: k as f64 * 0.5,
            distance: if k == 0 { 0.0 } else { speed * 0.5 },
            dtheta: 0.0,
            noise: OdometryNoise::default(),
        })
        .collect();
    let truth: Vec<(f64, f64)> = (0..60)
        .map(|k| {
            let s = speed * 0.5 * k as f64;
            (s * heading.cos(), s * heading.sin())
        })
        .collect();
    let fixes: Vec<GnssFix> = truth
        .iter()
        .enumerate()
        .map(|(k, p)| GnssFix {
            timestamp: k as f64 * 0.5,
            x: p.0 + noise.sample(&mut rng),
            y: p.1 + noise.sample(&mut rng),
            sigma: 3.0,
        })
        .collect();
    let averaged = average_fixes(&fixes, &odometry, &AveragingConfig::default()).unwrap();
    assert_eq!(averaged.len(), fixes.len());
    let rms = |fs: &[GnssFix]| {
        let s: f64 = fs
            .iter()
            .map(|f| {
                let p = truth[(f.timestamp / 0.5).round() as usize];
                (f.x - p.0).powi(2) + (f.y - p.1).powi(2)
            })
            .sum();
        (s / fs.len() as f64).sqrt()
    };
    assert!(rms(&averaged) < rms(&fixes), "{} vs {}", rms(&averaged), rms(&fixes));
    for w in averaged.windows(2) {
        assert!(w[1].timestamp > w[0].timestamp);
    }
    assert!(averaged.iter().all(|f| f.sigma <= 3.0 + 1e-12));
}
