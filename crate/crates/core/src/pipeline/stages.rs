//! File-level pipeline stages. Each stage reads and writes the formats of
//! the owning modules; the CLI subcommands and the end-to-end run call
//! exactly these functions.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::config::{parse_acceptance, EvalSection, ExtractSection, MapSection, PipelineConfig, TrainSection};
use super::svg::{histogram, line_plot, Series};
use super::Log;
use crate::error::{Error, Result};
use crate::eval::{average_precision, mean_accepted_distance_multi, pr_curve_multi, ImageEval, PrCurve};
use crate::extraction::{extract_seps_with, Detection, load_detections, save_detections};
use crate::fcnn::{forward, io::load_network, io::save_network, train, Network, Tensor, TrainOutcome};
use crate::geomap::{
    average_fixes, build_map, CameraConfig, compare_maps, fuse_trajectory, load_landmarks, load_trajectory, ComparisonReport,
    LandmarkMap, Pose2D, TrajectoryRecord,
};
use crate::groundtruth::{augment, training_target, Annotation, AugmentConfig};
use crate::raster::io::{load_lkm, save_lkm};
use crate::synthfield::{
    corrupt_sensors, load_frames, load_view_image, render_views, write_run, FieldTruth, SensorNoise,
};

/// Sorted ids of `<dir>/<id>.<ext>` files.
pub fn list_ids(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn require_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("not a directory: {}", dir.display())))
    }
}

pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("no such file: {}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSummary {
    pub frames: usize,
    pub plants: usize,
    pub annotated_seps: usize,
}

/// Renders every frame of `field` and writes the run directory.
pub fn gen_run(out: &Path, field: &FieldTruth, noise: &SensorNoise, sensor_seed: u64, label: &str) -> Result<GenSummary> {
    let views = render_views(field, label)?;
    let trajectory = corrupt_sensors(&field.trajectory, noise, sensor_seed)?;
    write_run(out, field, &views, &trajectory)?;
    let annotated_seps = views.iter().map(|v| v.annotation.seps.len() + v.annotation.regions.len()).sum();
    Ok(GenSummary { frames: views.len(), plants: field.plants.len(), annotated_seps })
}

/// Likelihood targets (`<out>/<id>.lkm`) for every annotated frame of a run.
pub fn gt_stage(run_dir: &Path, out: &Path, sigma: f64) -> Result<usize> {
    require_dir(run_dir)?;
    ensure_dir(out)?;
    let frames = load_frames(run_dir)?;
    for f in &frames {
        let image = load_view_image(run_dir, &f.image_id)?;
        let ann = Annotation::load(run_dir.join("annotations").join(format!("{}.json", f.image_id)))?;
        let target = training_target(&ann, image.width(), image.height(), sigma)?;
        save_lkm(&target, out.join(format!("{}.lkm", f.image_id)))?;
    }
    Ok(frames.len())
}

/// A run directory and the directory holding its targets.
#[derive(Debug, Clone)]
pub struct TrainSource {
    pub run_dir: PathBuf,
    pub targets_dir: PathBuf,
}

/// Loads `(input, target)` pairs in run order, at most `max_images` frames.
pub fn load_training_set(sources: &[TrainSource], section: &TrainSection, seed: u64) -> Result<Vec<(Tensor, Tensor)>> {
    let limit = section.max_images.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    let mut taken = 0;
    'runs: for src in sources {
        require_dir(&src.run_dir)?;
        require_dir(&src.targets_dir)?;
        for f in load_frames(&src.run_dir)? {
            if taken == limit {
                break 'runs;
            }
            let image = load_view_image(&src.run_dir, &f.image_id)?;
            let target = load_lkm(src.targets_dir.join(format!("{}.lkm", f.image_id)))?;
            if section.augment {
                let cfg = AugmentConfig::new(section.crop_count, (image.width() / 2, image.height() / 2));
                for (x, r) in augment(&image, &target, &cfg, seed.wrapping_add(taken as u64))? {
                    out.push((Tensor::from_raster(&x), Tensor::from_raster(&r)));
                }
            } else {
                out.push((Tensor::from_raster(&image), Tensor::from_raster(&target)));
            }
            taken += 1;
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no training images found".into()));
    }
    Ok(out)
}

/// Trains the toy network from scratch and writes `model.sepn`,
/// `loss.csv` and `loss.svg` into `out`.
pub fn train_stage(sources: &[TrainSource], section: &TrainSection, seed: u64, out: &Path, log: &Log) -> Result<TrainOutcome> {
    ensure_dir(out)?;
    let data = load_training_set(sources, section, seed)?;
    log.info(&format!("training on {} samples for {} iterations", data.len(), section.iterations));
    let channels = data[0].0.shape().channels;
    let net = Network::toy(channels, seed);
    let every = (section.iterations / 10).max(1);
    let outcome = train(&net, &data, &section.to_train_config(seed), |i, loss| {
        if i % every == 0 || i + 1 == section.iterations {
            log.info(&format!("iteration {i}: loss {loss:.4}"));
        }
    })?;
    save_network(&outcome.network, out.join("model.sepn"))?;
    fs::write(out.join("loss.csv"), outcome.loss_csv())?;
    let points = outcome.loss_history.iter().enumerate().map(|(i, &l)| (i as f64, l)).collect();
    fs::write(
        out.join("loss.svg"),
        line_plot("training loss", "iteration", "loss", &[Series { label: "loss".into(), points }], None, None),
    )?;
    Ok(outcome)
}

/// Predicted likelihood maps (`<out>/<id>.lkm`) for the first `limit`
/// frames of a run.
pub fn infer_stage(weights: &Path, run_dir: &Path, out: &Path, limit: Option<usize>) -> Result<Vec<String>> {
    require_file(weights)?;
    require_dir(run_dir)?;
    ensure_dir(out)?;
    let net = load_network(weights)?;
    let mut ids = Vec::new();
    for f in load_frames(run_dir)?.into_iter().take(limit.unwrap_or(usize::MAX)) {
        let image = load_view_image(run_dir, &f.image_id)?;
        let map = forward(&net, &Tensor::from_raster(&image))?.to_raster();
        save_lkm(&map, out.join(format!("{}.lkm", f.image_id)))?;
        ids.push(f.image_id);
    }
    Ok(ids)
}

/// Detection lists (`<out>/<id>.json`) for every map in `maps_dir`.
pub fn extract_stage(maps_dir: &Path, out: &Path, section: &ExtractSection) -> Result<usize> {
    require_dir(maps_dir)?;
    ensure_dir(out)?;
    let cfg = section.to_extract_config();
    let ids = list_ids(maps_dir, "lkm")?;
    for id in &ids {
        let map = load_lkm(maps_dir.join(format!("{id}.lkm")))?;
        save_detections(&extract_seps_with(&map, &cfg)?, out.join(format!("{id}.json")))?;
    }
    Ok(ids.len())
}

/// Headline figures: AP and MAD at the acceptance radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub ap: f64,
    pub mad_px: Option<f64>,
    pub threshold_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold_px: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub summary: EvalSummary,
    pub sweep: Vec<SweepPoint>,
    pub images: usize,
    pub detections: usize,
    pub ground_truth: usize,
}

/// Pairs every detection file with its annotation.
pub fn load_eval_images(det_dir: &Path, ann_dir: &Path, section: &EvalSection) -> Result<Vec<ImageEval>> {
    require_dir(det_dir)?;
    require_dir(ann_dir)?;
    let mut images = Vec::new();
    for id in list_ids(det_dir, "json")? {
        let ann_path = ann_dir.join(format!("{id}.json"));
        require_file(&ann_path)?;
        let ann = Annotation::load(ann_path)?;
        let ground_truth = ann
            .all_seps()?
            .into_iter()
            .filter(|s| section.species.is_none_or(|sp| sp == s.2))
            .map(|s| (s.0, s.1))
            .collect();
        images.push(ImageEval { detections: load_detections(det_dir.join(format!("{id}.json")))?, ground_truth });
    }
    Ok(images)
}

/// Writes `pr_<t>px.csv` per threshold, `pr.svg`, `sweep.json` and
/// `summary.json` into `out`.
pub fn eval_stage(det_dir: &Path, ann_dir: &Path, section: &EvalSection, out: &Path) -> Result<EvalReport> {
    ensure_dir(out)?;
    let images = load_eval_images(det_dir, ann_dir, section)?;
    let mut sweep = Vec::new();
    let mut series = Vec::new();
    for &t in &section.thresholds_px {
        let curve = pr_curve_multi(&images, t)?;
        fs::write(out.join(format!("pr_{t}px.csv")), curve.to_csv()?)?;
        sweep.push(SweepPoint { threshold_px: t, ap: average_precision(&curve) });
        series.push(Series { label: format!("{t} px"), points: pr_points(&curve) });
    }
    fs::write(
        out.join("pr.svg"),
        line_plot("precision / recall", "recall", "precision", &series, Some((0.0, 1.0)), Some((0.0, 1.0))),
    )?;
    let mad = mean_accepted_distance_multi(&images, section.acceptance_px)?;
    let summary = EvalSummary { ap: mad.ap, mad_px: mad.mad_px, threshold_px: section.acceptance_px };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&sweep)?)?;
    Ok(EvalReport {
        summary,
        sweep,
        images: images.len(),
        detections: images.iter().map(|i| i.detections.len()).sum(),
        ground_truth: images.iter().map(|i| i.ground_truth.len()).sum(),
    })
}

fn pr_points(curve: &PrCurve) -> Vec<(f64, f64)> {
    curve.points.iter().map(|p| (p.recall, p.precision)).collect()
}

/// Fused pose for every trajectory row.
pub fn fuse_records(rows: &[TrajectoryRecord], section: &MapSection) -> Result<Vec<Pose2D>> {
    let (odometry, raw_fixes) = TrajectoryRecord::split(rows, section.odometry);
    let first = *raw_fixes.first().ok_or_else(|| Error::InvalidArgument("trajectory has no GNSS fix".into()))?;
    // Heading from the first fix to the first one at least 50 mm away.
    let heading = raw_fixes
        .iter()
        .find(|f| (f.x - first.x).hypot(f.y - first.y) >= 50.0)
        .map_or(0.0, |f| (f.y - first.y).atan2(f.x - first.x));
    let fixes = if section.average_fixes { average_fixes(&raw_fixes, &odometry, &section.averaging)? } else { raw_fixes };
    let s2 = first.sigma * first.sigma;
    let h2 = section.initial_heading_sigma_rad.powi(2);
    let initial = Pose2D::new(first.x, first.y, heading, Matrix3::from_diagonal(&Vector3::new(s2, s2, h2)))?;
    fuse_trajectory(initial, &odometry, &fixes, &section.ukf)
}

/// Fuses the run's trajectory, projects each frame's detections and merges
/// them into a landmark map.
pub fn map_stage(det_dir: &Path, run_dir: &Path, config: &PipelineConfig, run_id: &str, date_tag: &str) -> Result<LandmarkMap> {
    require_dir(det_dir)?;
    require_dir(run_dir)?;
    let rows = load_trajectory(run_dir.join("trajectory.csv"))?;
    let poses = fuse_records(&rows, &config.map)?;
    let cam = config.camera();
    let m = config.map.border_margin_px;
    let mut frames = Vec::new();
    for f in load_frames(run_dir)? {
        let det_path = det_dir.join(format!("{}.json", f.image_id));
        if !det_path.is_file() {
            continue;
        }
        if rows.get(f.frame).is_none_or(|r| r.timestamp != f.timestamp) {
            return Err(Error::Format(format!("frame {} has no trajectory row at t={}", f.image_id, f.timestamp)));
        }
        let dets = load_detections(det_path)?.into_iter().filter(|d| inside(d, &cam, m)).collect();
        frames.push((dets, poses[f.frame]));
    }
    if frames.is_empty() {
        return Err(Error::InvalidArgument(format!("no detections for the frames of {}", run_dir.display())));
    }
    let landmarks = build_map(&frames, &cam, config.map.merge_radius_mm)?;
    Ok(LandmarkMap { run_id: run_id.to_string(), date_tag: date_tag.to_string(), landmarks })
}

fn inside(d: &Detection, cam: &CameraConfig, margin: f64) -> bool {
    let (w, h) = (2.0 * cam.principal_point.0 + 1.0, 2.0 * cam.principal_point.1 + 1.0);
    d.x >= margin - 0.5 && d.y >= margin - 0.5 && d.x <= w - 0.5 - margin && d.y <= h - 0.5 - margin
}

/// Writes `comparison.json`, `errors.csv` and `errors.svg` into `out`.
pub fn compare_stage(earlier: &Path, later: &Path, acceptance: &str, out: &Path) -> Result<ComparisonReport> {
    require_file(earlier)?;
    require_file(later)?;
    let acceptance = parse_acceptance(acceptance)?;
    ensure_dir(out)?;
    let a = load_landmarks(earlier)?;
    let b = load_landmarks(later)?;
    let report = compare_maps(&a.landmarks, &b.landmarks, acceptance)?;
    fs::write(out.join("comparison.json"), serde_json::to_string_pretty(&report)?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in &report.errors {
        w.serialize(e).map_err(|e| Error::Format(e.to_string()))?;
    }
    if report.errors.is_empty() {
        w.write_record(["earlier", "later", "dx", "dy", "distance"]).map_err(|e| Error::Format(e.to_string()))?;
    }
    fs::write(out.join("errors.csv"), w.into_inner().map_err(|e| Error::Format(e.to_string()))?)?;
    let distances: Vec<f64> = report.errors.iter().map(|e| e.distance).collect();
    fs::write(out.join("errors.svg"), histogram("landmark match errors", "distance [mm]", &distances, 20))?;
    Ok(report)
}
