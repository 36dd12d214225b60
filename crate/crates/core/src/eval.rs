//! Detection evaluation: confidence-ranked greedy matching against ground
//! truth SEPs, precision/recall curves, average precision and mean accepted
//! distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::Detection;

/// Acceptance radius for the mean accepted distance, in pixels.
pub const DEFAULT_ACCEPTANCE_PX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMatch {
    /// Matched ground-truth index, `None` for a false positive.
    pub gt: Option<usize>,
    pub distance: Option<f64>,
}

impl DetectionMatch {
    pub fn is_true_positive(&self) -> bool {
        self.gt.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// One entry per detection, in input order.
    pub detections: Vec<DetectionMatch>,
    /// Matching detection index for every ground-truth SEP.
    pub gt_matched: Vec<Option<usize>>,
}

impl MatchOutcome {
    pub fn true_positives(&self) -> usize {
        self.detections.iter().filter(|m| m.is_true_positive()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.detections.len() - self.true_positives()
    }

    pub fn missed(&self) -> usize {
        self.gt_matched.iter().filter(|m| m.is_none()).count()
    }
}

/// Visits detections by descending confidence (input order on ties). Each
/// takes the nearest ground truth not yet claimed; it is a true positive when
/// that distance is `<= threshold`, which then consumes the ground truth.
pub fn match_detections(dets: &[Detection], gts: &[(f64, f64)], threshold: f64) -> Result<MatchOutcome> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    let mut outcome = MatchOutcome {
        detections: vec![DetectionMatch { gt: None, distance: None }; dets.len()],
        gt_matched: vec![None; gts.len()],
    };
    for di in confidence_order(dets) {
        let d = &dets[di];
        let nearest = gts
            .iter()
            .enumerate()
            .filter(|(gi, _)| outcome.gt_matched[*gi].is_none())
            .map(|(gi, &(gx, gy))| (gi, (d.x - gx).hypot(d.y - gy)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((gi, dist)) = nearest {
            if dist <= threshold {
                outcome.gt_matched[gi] = Some(di);
                outcome.detections[di] = DetectionMatch { gt: Some(gi), distance: Some(dist) };
            }
        }
    }
    Ok(outcome)
}

fn confidence_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub cutoff: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall at every distinct detection confidence, cutoffs
/// descending (so recall is non-decreasing along the list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub threshold_px: f64,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(["cutoff", "precision", "recall"]).map_err(|e| Error::Format(e.to_string()))?;
        for p in &self.points {
            w.serialize(p).map_err(|e| Error::Format(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Detections and ground truth of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<(f64, f64)>,
}

pub fn pr_curve(dets: &[Detection], gts: &[(f64, f64)], threshold: f64) -> Result<PrCurve> {
    pr_curve_multi(
        &[ImageEval { detections: dets.to_vec(), ground_truth: gts.to_vec() }],
        threshold,
    )
}

/// Sequence-level curve: images are matched independently and the TP/FP/GT
/// counts are pooled before every curve point is computed.
pub fn pr_curve_multi(images: &[ImageEval], threshold: f64) -> Result<PrCurve> {
    let total_gt: usize = images.iter().map(|im| im.ground_truth.len()).sum();
    if total_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut ranked: Vec<(f64, bool)> = Vec::new();
    for im in images {
        let m = match_detections(&im.detections, &im.ground_truth, threshold)?;
        ranked.extend(im.detections.iter().zip(&m.detections).map(|(d, dm)| (d.confidence, dm.is_true_positive())));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < ranked.len() {
        let cutoff = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == cutoff {
            if ranked[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            cutoff,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / total_gt as f64,
        });
    }
    Ok(PrCurve { threshold_px: threshold, points })
}

/// Area under the precision envelope `p(r) = max_{r' >= r} p(r')`,
/// integrated over recall. An empty curve scores 0.
pub fn average_precision(curve: &PrCurve) -> f64 {
    let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.recall, p.precision)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut envelope = vec![0.0f64; pts.len()];
    let mut running = 0.0f64;
    for i in (0..pts.len()).rev() {
        running = running.max(pts[i].1);
        envelope[i] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (i, &(r, _)) in pts.iter().enumerate() {
        ap += (r - prev_recall) * envelope[i];
        prev_recall = r;
    }
    ap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MadReport {
    /// Mean distance of the accepted detections; `None` without any.
    pub mad_px: Option<f64>,
    pub ap: f64,
    pub acceptance_px: f64,
    pub true_positives: usize,
}

pub fn mean_accepted_distance(dets: &[Detection], gts: &[(f64, f64)], acceptance: f64) -> Result<MadReport> {
    mean_accepted_distance_multi(
        &[ImageEval { detections: dets.to_vec(), ground_truth: gts.to_vec() }],
        acceptance,
    )
}

pub fn mean_accepted_distance_multi(images: &[ImageEval], acceptance: f64) -> Result<MadReport> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for im in images {
        let m = match_detections(&im.detections, &im.ground_truth, acceptance)?;
        for d in m.detections.iter().filter_map(|d| d.distance) {
            sum += d;
            count += 1;
        }
    }
    let ap = average_precision(&pr_curve_multi(images, acceptance)?);
    Ok(MadReport {
        mad_px: (count > 0).then(|| sum / count as f64),
        ap,
        acceptance_px: acceptance,
        true_positives: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, y: f64, confidence: f64) -> Detection {
        Detection { x, y, confidence }
    }

    #[test]
    fn exact_hit_is_true_positive() {
        let m = match_detections(&[det(3.0, 4.0, 0.9)], &[(3.0, 4.0)], 6.0).unwrap();
        assert_eq!(m.detections[0], DetectionMatch { gt: Some(0), distance: Some(0.0) });
    }

    #[test]
    fn only_highest_scored_detection_per_gt() {
        let dets = [det(14.0, 10.0, 0.5), det(12.0, 10.0, 0.9)];
        let m = match_detections(&dets, &[(10.0, 10.0)], 6.0).unwrap();
        assert!(m.detections[1].is_true_positive());
        assert!(!m.detections[0].is_true_positive());
        assert_eq!(m.gt_matched, vec![Some(1)]);
    }

    #[test]
    fn distance_equal_to_threshold_is_accepted() {
        let m = match_detections(&[det(6.0, 0.0, 1.0)], &[(0.0, 0.0)], 6.0).unwrap();
        assert_eq!(m.true_positives(), 1);
    }

    #[test]
    fn non_positive_threshold_rejected() {
        assert!(match_detections(&[], &[(0.0, 0.0)], 0.0).is_err());
    }

    #[test]
    fn perfect_detections_pin_precision() {
        let gts = [(1.0, 1.0), (10.0, 10.0), (20.0, 5.0)];
        let dets: Vec<_> = gts.iter().enumerate().map(|(i, &(x, y))| det(x, y, 0.5 + 0.1 * i as f64)).collect();
        let c = pr_curve(&dets, &gts, 6.0).unwrap();
        assert!(c.points.iter().all(|p| p.precision == 1.0));
        assert_eq!(c.points.last().unwrap().recall, 1.0);
        assert_eq!(average_precision(&c), 1.0);
        let csv = c.to_csv().unwrap();
        assert!(csv.starts_with("cutoff,precision,recall\n0.7,1.0,"), "{csv}");
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        assert!(matches!(pr_curve(&[det(0.0, 0.0, 1.0)], &[], 6.0), Err(Error::NoGroundTruth)));
    }

    #[test]
    fn single_point_envelope_is_a_rectangle() {
        let c = PrCurve { threshold_px: 6.0, points: vec![PrPoint { cutoff: 0.5, precision: 0.5, recall: 0.5 }] };
        assert_eq!(average_precision(&c), 0.25);
        assert_eq!(average_precision(&PrCurve { threshold_px: 6.0, points: vec![] }), 0.0);
    }

    #[test]
    fn empty_detection_list_has_zero_ap() {
        let c = pr_curve(&[], &[(1.0, 1.0)], 6.0).unwrap();
        assert!(c.points.is_empty());
        assert_eq!(average_precision(&c), 0.0);
    }

    #[test]
    fn mad_of_known_distances() {
        let gts = [(0.0, 0.0), (100.0, 0.0), (200.0, 0.0)];
        let dets = [det(3.0, 0.0, 0.9), det(100.0, 5.0, 0.8), det(210.0, 0.0, 0.7)];
        let r = mean_accepted_distance(&dets, &gts, DEFAULT_ACCEPTANCE_PX).unwrap();
        assert_eq!(r.mad_px, Some(6.0));
        assert_eq!(r.true_positives, 3);
        assert_eq!(r.ap, 1.0);
    }

    #[test]
    fn mad_without_matches_is_absent() {
        let r = mean_accepted_distance(&[det(50.0, 50.0, 1.0)], &[(0.0, 0.0)], 20.0).unwrap();
        assert_eq!(r.mad_px, None);
        let exact = mean_accepted_distance(&[det(0.0, 0.0, 1.0)], &[(0.0, 0.0)], 20.0).unwrap();
        assert_eq!(exact.mad_px, Some(0.0));
    }
}
