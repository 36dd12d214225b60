//! Synthetic end-to-end benchmark: train on generated fields, score the
//! detector on a held-out field, then map one field on two visits and
//! compare the maps.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{EvalSection, PipelineConfig};
use super::stages::{
    compare_stage, eval_stage, extract_stage, gen_run, gt_stage, infer_stage, map_stage, EvalReport, TrainSource,
};
use super::Log;
use crate::error::Result;
use crate::geomap::{save_landmarks, ComparisonReport};
use crate::synthfield::{generate_field, FieldConfig, FieldTruth};

/// Seed of an independent sub-experiment.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag)
}

const TEST_FIELD: u64 = 1;
const MAP_FIELD: u64 = 2;
const SENSORS_A: u64 = 3;
const SENSORS_B: u64 = 4;
const DEATH: u64 = 5;
const TRAIN: u64 = 6;
const TRAIN_FIELDS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub train_images: usize,
    pub test_images: usize,
    pub final_loss: f64,
    pub ap: f64,
    pub mad_px: Option<f64>,
    pub threshold_px: f64,
    pub ap_sweep: Vec<(f64, f64)>,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub frames: usize,
    pub plants_a: usize,
    pub plants_b: usize,
    pub landmarks_a: usize,
    pub landmarks_b: usize,
    pub comparison: ComparisonReport,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eReport {
    pub detector: DetectorReport,
    pub map: MapReport,
}

/// Regression bounds of the benchmark.
pub const MIN_AP: f64 = 0.90;
pub const MAX_MAD_PX: f64 = 2.0;
pub const MIN_MAP_RECALL: f64 = 0.95;
pub const MAX_MAP_ERROR_MM: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

impl E2eReport {
    pub fn checks(&self) -> Vec<Check> {
        let d = &self.detector;
        let c = &self.map.comparison;
        let check = |name: String, pass: bool| Check { name, pass };
        vec![
            check(format!("detector AP {:.4} >= {MIN_AP} at {} px", d.ap, d.threshold_px), d.ap >= MIN_AP),
            check(
                format!("detector MAD {:?} px <= {MAX_MAD_PX}", d.mad_px),
                d.mad_px.is_some_and(|m| m <= MAX_MAD_PX),
            ),
            check(format!("map recall {:.4} >= {MIN_MAP_RECALL}", c.recall), c.recall >= MIN_MAP_RECALL),
            check(
                format!("map mean error {:?} mm <= {MAX_MAP_ERROR_MM}", c.mean_distance),
                c.mean_distance.is_some_and(|m| m <= MAX_MAP_ERROR_MM),
            ),
        ]
    }
}

fn benchmark_field(config: &PipelineConfig, seed: u64) -> FieldConfig {
    FieldConfig {
        field_length_mm: config.e2e.field_length_mm,
        field_width_mm: config.e2e.field_width_mm,
        rng_seed: seed,
        ..config.field.clone()
    }
}

/// Trains on generated fields and evaluates on a held-out one. Writes
/// `model/model.sepn` and everything under `train/` and `test/`.
pub fn run_detector_benchmark(config: &PipelineConfig, out: &Path, log: &Log) -> Result<(DetectorReport, PathBuf)> {
    config.validate()?;
    let e2e = &config.e2e;
    let sigma = e2e.sigma_px;

    let mut sources = Vec::new();
    let mut images = 0;
    let mut k = 0;
    while images < e2e.train_images {
        let field = generate_field(&benchmark_field(config, derive_seed(config.seed, TRAIN_FIELDS + k)))?;
        let run_dir = out.join("train").join(format!("field_{k:03}"));
        let targets_dir = run_dir.join("targets");
        images += gen_run(&run_dir, &field, &config.noise, 0, &format!("train{k:03}"))?.frames;
        gt_stage(&run_dir, &targets_dir, sigma)?;
        sources.push(TrainSource { run_dir, targets_dir });
        k += 1;
    }
    log.info(&format!("generated {images} training frames from {k} fields"));

    let mut section = config.train.clone();
    section.max_images = Some(e2e.train_images);
    let started = Instant::now();
    let model_dir = out.join("model");
    let outcome = super::stages::train_stage(&sources, &section, derive_seed(config.seed, TRAIN), &model_dir, log)?;
    let train_seconds = started.elapsed().as_secs_f64();
    let weights = model_dir.join("model.sepn");

    let test = out.join("test");
    let test_field = generate_field(&benchmark_field(config, derive_seed(config.seed, TEST_FIELD)))?;
    let run_dir = test.join("run");
    gen_run(&run_dir, &test_field, &config.noise, 0, "test")?;
    infer_stage(&weights, &run_dir, &test.join("maps"), Some(e2e.test_images))?;
    extract_stage(&test.join("maps"), &test.join("detections"), &config.extract)?;
    let eval_section = EvalSection { acceptance_px: e2e.threshold_px, ..config.eval.clone() };
    let EvalReport { summary, sweep, images: test_images, .. } =
        eval_stage(&test.join("detections"), &run_dir.join("annotations"), &eval_section, &test.join("eval"))?;

    let report = DetectorReport {
        train_images: images.min(e2e.train_images),
        test_images,
        final_loss: outcome.loss_history.last().copied().unwrap_or(f64::NAN),
        ap: summary.ap,
        mad_px: summary.mad_px,
        threshold_px: summary.threshold_px,
        ap_sweep: sweep.iter().map(|p| (p.threshold_px, p.ap)).collect(),
        train_seconds,
    };
    log.info(&format!("detector: AP {:.4} at {} px, MAD {:?} px", report.ap, report.threshold_px, report.mad_px));
    Ok((report, weights))
}

/// Maps one field on two visits (regrown plants, fresh sensor noise) with
/// the trained detector and compares the two landmark maps. Writes
/// everything under `map/`.
pub fn run_map_simulation(config: &PipelineConfig, weights: &Path, out: &Path, log: &Log) -> Result<MapReport> {
    config.validate()?;
    let started = Instant::now();
    let dir = out.join("map");
    let field_a = generate_field(&benchmark_field(config, derive_seed(config.seed, MAP_FIELD)))?;
    let field_b = field_a.regrow(1).kill_weeds(config.e2e.weed_death_fraction, derive_seed(config.seed, DEATH))?;

    let visit = |name: &str, field: &FieldTruth, sensor_tag: u64| -> Result<(usize, PathBuf)> {
        let run = dir.join(name);
        let summary = gen_run(&run.join("run"), field, &config.noise, derive_seed(config.seed, sensor_tag), name)?;
        infer_stage(weights, &run.join("run"), &run.join("maps"), None)?;
        extract_stage(&run.join("maps"), &run.join("detections"), &config.extract)?;
        let map = map_stage(&run.join("detections"), &run.join("run"), config, name, &format!("epoch{}", field.epoch))?;
        let path = dir.join(format!("landmarks_{name}.csv"));
        save_landmarks(&map, &path)?;
        log.info(&format!("run {name}: {} frames, {} landmarks", summary.frames, map.landmarks.len()));
        Ok((summary.frames, path))
    };
    let (frames, path_a) = visit("a", &field_a, SENSORS_A)?;
    let (_, path_b) = visit("b", &field_b, SENSORS_B)?;

    let comparison = compare_stage(&path_a, &path_b, &config.compare.acceptance, &dir.join("compare"))?;
    log.info(&format!(
        "maps: recall {:.3}, precision {:.3}, mean error {:?} mm",
        comparison.recall, comparison.precision, comparison.mean_distance
    ));
    Ok(MapReport {
        frames,
        plants_a: field_a.plants.len(),
        plants_b: field_b.plants.len(),
        landmarks_a: comparison.earlier_count,
        landmarks_b: comparison.later_count,
        comparison,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Both halves of the benchmark; writes `e2e_summary.json` into `out`.
pub fn run_e2e(config: &PipelineConfig, out: &Path, log: &Log) -> Result<E2eReport> {
    fs::create_dir_all(out)?;
    let (detector, weights) = run_detector_benchmark(config, out, log)?;
    let map = run_map_simulation(config, &weights, out, log)?;
    let report = E2eReport { detector, map };
    fs::write(out.join("e2e_summary.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
