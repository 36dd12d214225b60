//! Landmark maps: building from projected detections and comparing two runs.

use serde::{Deserialize, Serialize};

use super::{project_detection, CameraConfig, Pose2D, GNSS_95_MM};
use crate::error::{Error, Result};
use crate::extraction::Detection;

/// Landmarks closer than this are one plant: the GNSS 95% error.
pub const DEFAULT_MERGE_RADIUS_MM: f64 = GNSS_95_MM;
pub const MAX_MERGE_PASSES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    /// Mean detection confidence over the merged observations.
    pub confidence: f64,
    pub observations: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LandmarkMap {
    pub run_id: String,
    pub date_tag: String,
    pub landmarks: Vec<Landmark>,
}

/// Projects every detection and merges the result.
pub fn build_map(
    frames: &[(Vec<Detection>, Pose2D)],
    cam: &CameraConfig,
    merge_radius: f64,
) -> Result<Vec<Landmark>> {
    let mut raw = Vec::new();
    for (dets, pose) in frames {
        for d in dets {
            let (x, y) = project_detection(d, pose, cam)?;
            raw.push(Landmark { x, y, confidence: d.confidence, observations: 1 });
        }
    }
    merge_landmarks(raw, merge_radius)
}

/// Repeated passes in ascending `(y, x)` order: each surviving landmark
/// absorbs every later one closer than `radius` into a mean weighted by
/// `confidence * observations`. Stops at the first pass without merges.
pub fn merge_landmarks(mut marks: Vec<Landmark>, radius: f64) -> Result<Vec<Landmark>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("merge radius must be positive, got {radius}")));
    }
    for _ in 0..MAX_MERGE_PASSES {
        marks.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
        let mut alive = vec![true; marks.len()];
        let mut merged = false;
        for i in 0..marks.len() {
            if !alive[i] {
                continue;
            }
            for j in i + 1..marks.len() {
                if alive[j] && (marks[i].x - marks[j].x).hypot(marks[i].y - marks[j].y) < radius {
                    marks[i] = combine(&marks[i], &marks[j]);
                    alive[j] = false;
                    merged = true;
                }
            }
        }
        if !merged {
            return Ok(marks);
        }
        let mut keep = alive.into_iter();
        marks.retain(|_| keep.next().unwrap_or(false));
    }
    Err(Error::MergeNoFixpoint(MAX_MERGE_PASSES))
}

fn combine(a: &Landmark, b: &Landmark) -> Landmark {
    let (oa, ob) = (a.observations as f64, b.observations as f64);
    let (mut wa, mut wb) = (a.confidence * oa, b.confidence * ob);
    if !(wa + wb > 0.0) {
        (wa, wb) = (oa, ob);
    }
    let w = wa + wb;
    Landmark {
        x: (a.x * wa + b.x * wb) / w,
        y: (a.y * wa + b.y * wb) / w,
        confidence: (a.confidence * oa + b.confidence * ob) / (oa + ob),
        observations: a.observations + b.observations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acceptance {
    Fixed(f64),
    /// Three times the RMS nearest-neighbor distance from earlier to later.
    Auto3Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub matched: usize,
    pub earlier: usize,
    pub later: usize,
}

impl MatchCounts {
    pub fn recall(&self) -> f64 {
        self.matched as f64 / self.earlier as f64
    }

    pub fn precision(&self) -> f64 {
        self.matched as f64 / self.later as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub earlier: usize,
    pub later: usize,
    /// `later - earlier`, mm.
    pub dx: f64,
    pub dy: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub matched: usize,
    /// Earlier landmarks without a partner inside the acceptance range.
    pub outliers: usize,
    pub earlier_count: usize,
    pub later_count: usize,
    pub recall: f64,
    pub precision: f64,
    pub acceptance_mm: f64,
    pub mean_dx: Option<f64>,
    pub std_dx: Option<f64>,
    pub mean_dy: Option<f64>,
    pub std_dy: Option<f64>,
    pub mean_distance: Option<f64>,
    pub errors: Vec<MatchedPair>,
}

pub fn auto_acceptance(earlier: &[Landmark], later: &[Landmark]) -> Result<f64> {
    if earlier.is_empty() || later.is_empty() {
        return Err(Error::EmptyMap);
    }
    let sq: f64 = earlier
        .iter()
        .map(|a| later.iter().map(|b| (a.x - b.x).powi(2) + (a.y - b.y).powi(2)).fold(f64::INFINITY, f64::min))
        .sum();
    Ok(3.0 * (sq / earlier.len() as f64).sqrt())
}

/// One-to-one matching by ascending distance over all candidate pairs
/// (ties by earlier index, then later index); pairs beyond the acceptance
/// range never match.
pub fn compare_maps(earlier: &[Landmark], later: &[Landmark], acceptance: Acceptance) -> Result<ComparisonReport> {
    if earlier.is_empty() || later.is_empty() {
        return Err(Error::EmptyMap);
    }
    let acceptance_mm = match acceptance {
        Acceptance::Fixed(a) if a > 0.0 => a,
        Acceptance::Fixed(a) => return Err(Error::InvalidArgument(format!("acceptance must be positive, got {a}"))),
        // Identical maps give zero; keep the range positive.
        Acceptance::Auto3Sigma => auto_acceptance(earlier, later)?.max(1e-9),
    };
    let mut candidates = Vec::new();
    for (i, a) in earlier.iter().enumerate() {
        for (j, b) in later.iter().enumerate() {
            let d = (b.x - a.x).hypot(b.y - a.y);
            if d <= acceptance_mm {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; earlier.len()];
    let mut used_l = vec![false; later.len()];
    let mut errors = Vec::new();
    for (d, i, j) in candidates {
        if used_e[i] || used_l[j] {
            continue;
        }
        used_e[i] = true;
        used_l[j] = true;
        errors.push(MatchedPair { earlier: i, later: j, dx: later[j].x - earlier[i].x, dy: later[j].y - earlier[i].y, distance: d });
    }
    errors.sort_by_key(|p| p.earlier);
    let counts = MatchCounts { matched: errors.len(), earlier: earlier.len(), later: later.len() };
    let (mean_dx, std_dx) = mean_std(errors.iter().map(|e| e.dx));
    let (mean_dy, std_dy) = mean_std(errors.iter().map(|e| e.dy));
    let (mean_distance, _) = mean_std(errors.iter().map(|e| e.distance));
    Ok(ComparisonReport {
        matched: counts.matched,
        outliers: counts.earlier - counts.matched,
        earlier_count: counts.earlier,
        later_count: counts.later,
        recall: counts.recall(),
        precision: counts.precision(),
        acceptance_mm,
        mean_dx,
        std_dx,
        mean_dy,
        std_dy,
        mean_distance,
        errors,
    })
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (Option<f64>, Option<f64>) {
    let n = values.clone().count();
    if n == 0 {
        return (None, None);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (Some(mean), Some(var.sqrt()))
}
