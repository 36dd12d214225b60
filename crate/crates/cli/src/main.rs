//! `seploc`: stem emerging point localization and plant mapping.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use seploc::extraction::Scoring;
use seploc::geomap::save_landmarks;
use seploc::groundtruth::Species;
use seploc::pipeline::{self, derive_seed, parse_thresholds, Log, PipelineConfig, TrainSource};
use seploc::synthfield::{generate_field, FieldTruth};
use seploc::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "seploc", version, about = "Stem emerging point localization and plant mapping")]
#[command(after_help = "Settings come from, in order of precedence: command-line flags, the --config file, built-in defaults.")]
struct Cli {
    /// TOML config file; any section or key may be omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (also the field seed for `gen`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// No progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print the result as one JSON object on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic field and render one run over it.
    Gen(GenArgs),
    /// Likelihood-map targets for every frame of a run.
    Gt(GtArgs),
    /// Train the network on runs and their targets.
    Train(TrainArgs),
    /// Predict likelihood maps for the frames of a run.
    Infer(InferArgs),
    /// Extract SEP detections from likelihood maps.
    Extract(ExtractArgs),
    /// Score detections against annotations.
    Eval(EvalArgs),
    /// Build a landmark map from detections and the run's trajectory.
    Map(MapArgs),
    /// Compare two landmark maps of the same field.
    Compare(CompareArgs),
    /// Full synthetic benchmark: train, evaluate, map twice, compare.
    E2e(E2eArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Run directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Revisit the field of an earlier run (its field_truth.json) instead
    /// of generating a new one.
    #[arg(long)]
    from: Option<PathBuf>,
    /// Appearance generation for a revisit.
    #[arg(long, default_value_t = 1, requires = "from")]
    epoch: u32,
    /// Fraction of weeds removed on a revisit.
    #[arg(long, requires = "from")]
    weed_death: Option<f64>,
    /// Image id prefix.
    #[arg(long, default_value = "run")]
    label: String,
    /// Seed of the simulated GNSS and odometry noise.
    #[arg(long)]
    sensor_seed: Option<u64>,
    /// Per-axis GNSS standard deviation, mm.
    #[arg(long)]
    gnss_sigma: Option<f64>,
    #[arg(long)]
    field_length: Option<f64>,
    #[arg(long)]
    field_width: Option<f64>,
}

#[derive(Args, Debug)]
struct GtArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Likelihood spread, px.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Run directory; repeat for several runs.
    #[arg(long = "run", required = true)]
    runs: Vec<PathBuf>,
    /// Target directory of the matching --run.
    #[arg(long = "targets", required = true)]
    targets: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_images: Option<usize>,
    /// Add rotated, mirrored and cropped copies of every image.
    #[arg(long)]
    augment: bool,
}

#[derive(Args, Debug)]
struct InferArgs {
    /// Network weights (SEPN).
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Only the first N frames.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScoringArg {
    RegionMean,
    RegionMax,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    maps: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    scoring: Option<ScoringArg>,
    #[arg(long)]
    min_area: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpeciesArg {
    Crop,
    Weed,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `start:stop:step` or a comma-separated list, px.
    #[arg(long)]
    thresholds: Option<String>,
    /// Acceptance radius of the AP and MAD summary, px.
    #[arg(long)]
    acceptance: Option<f64>,
    /// Score one species only.
    #[arg(long, value_enum)]
    species: Option<SpeciesArg>,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[arg(long)]
    detections: PathBuf,
    /// Run directory holding frames.csv and trajectory.csv.
    #[arg(long)]
    run: PathBuf,
    /// Landmark CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "run")]
    run_id: String,
    #[arg(long, default_value = "")]
    date_tag: String,
    #[arg(long)]
    merge_radius: Option<f64>,
    /// Feed raw GNSS fixes to the filter.
    #[arg(long)]
    no_averaging: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    earlier: PathBuf,
    later: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `auto` or a distance in mm.
    #[arg(long)]
    acceptance: Option<String>,
}

#[derive(Args, Debug)]
struct E2eArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    train_images: Option<usize>,
    #[arg(long)]
    test_images: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.field.rng_seed = seed;
    }
    Ok(config)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: &Cli) -> Result<Value> {
    let mut config = load_config(cli)?;
    let log = Log { quiet: cli.quiet || cli.json };
    let out = match &cli.command {
        Command::Gen(a) => {
            set(&mut config.noise.gnss_sigma_mm, a.gnss_sigma);
            set(&mut config.field.field_length_mm, a.field_length);
            set(&mut config.field.field_width_mm, a.field_width);
            config.validate()?;
            let field = match &a.from {
                Some(path) => {
                    pipeline::require_file(path)?;
                    let base = FieldTruth::from_json(&fs::read_to_string(path)?)?;
                    let seed = derive_seed(config.seed, u64::from(a.epoch));
                    base.regrow(a.epoch).kill_weeds(a.weed_death.unwrap_or(0.0), seed)?
                }
                None => generate_field(&config.field)?,
            };
            let sensor_seed = a.sensor_seed.unwrap_or_else(|| derive_seed(config.seed, 1000 + u64::from(field.epoch)));
            let s = pipeline::gen_run(&a.out, &field, &config.noise, sensor_seed, &a.label)?;
            json!({ "frames": s.frames, "plants": s.plants, "annotated_seps": s.annotated_seps, "epoch": field.epoch })
        }
        Command::Gt(a) => {
            set(&mut config.groundtruth.sigma_px, a.sigma);
            config.validate()?;
            let n = pipeline::gt_stage(&a.run, &a.out, config.groundtruth.sigma_px)?;
            json!({ "maps": n, "sigma_px": config.groundtruth.sigma_px })
        }
        Command::Train(a) => {
            if a.runs.len() != a.targets.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} --run but {} --targets directories",
                    a.runs.len(),
                    a.targets.len()
                )));
            }
            let t = &mut config.train;
            set(&mut t.iterations, a.iterations);
            set(&mut t.learning_rate, a.learning_rate);
            set(&mut t.batch_size, a.batch_size);
            if a.max_images.is_some() {
                t.max_images = a.max_images;
            }
            t.augment |= a.augment;
            config.validate()?;
            let sources: Vec<TrainSource> = a
                .runs
                .iter()
                .zip(&a.targets)
                .map(|(r, t)| TrainSource { run_dir: r.clone(), targets_dir: t.clone() })
                .collect();
            let outcome = pipeline::train_stage(&sources, &config.train, config.seed, &a.out, &log)?;
            json!({
                "weights": a.out.join("model.sepn"),
                "iterations": outcome.loss_history.len(),
                "final_loss": outcome.loss_history.last(),
            })
        }
        Command::Infer(a) => {
            let ids = pipeline::infer_stage(&a.weights, &a.run, &a.out, a.limit)?;
            json!({ "maps": ids.len() })
        }
        Command::Extract(a) => {
            if let Some(s) = a.scoring {
                config.extract.scoring = match s {
                    ScoringArg::RegionMean => Scoring::RegionMean,
                    ScoringArg::RegionMax => Scoring::RegionMax,
                };
            }
            set(&mut config.extract.min_region_area, a.min_area);
            config.validate()?;
            let n = pipeline::extract_stage(&a.maps, &a.out, &config.extract)?;
            json!({ "files": n })
        }
        Command::Eval(a) => {
            if let Some(t) = &a.thresholds {
                config.eval.thresholds_px = parse_thresholds(t)?;
            }
            set(&mut config.eval.acceptance_px, a.acceptance);
            if let Some(s) = a.species {
                config.eval.species = Some(match s {
                    SpeciesArg::Crop => Species::Crop,
                    SpeciesArg::Weed => Species::Weed,
                });
            }
            config.validate()?;
            let r = pipeline::eval_stage(&a.detections, &a.annotations, &config.eval, &a.out)?;
            json!({
                "ap": r.summary.ap,
                "mad_px": r.summary.mad_px,
                "threshold_px": r.summary.threshold_px,
                "sweep": r.sweep,
                "images": r.images,
                "detections": r.detections,
                "ground_truth": r.ground_truth,
            })
        }
        Command::Map(a) => {
            set(&mut config.map.merge_radius_mm, a.merge_radius);
            config.map.average_fixes &= !a.no_averaging;
            config.validate()?;
            let map = pipeline::map_stage(&a.detections, &a.run, &config, &a.run_id, &a.date_tag)?;
            if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            save_landmarks(&map, &a.out)?;
            json!({ "landmarks": map.landmarks.len(), "out": a.out })
        }
        Command::Compare(a) => {
            set(&mut config.compare.acceptance, a.acceptance.clone());
            config.validate()?;
            let r = pipeline::compare_stage(&a.earlier, &a.later, &config.compare.acceptance, &a.out)?;
            json!({
                "matched": r.matched,
                "earlier": r.earlier_count,
                "later": r.later_count,
                "recall": r.recall,
                "precision": r.precision,
                "acceptance_mm": r.acceptance_mm,
                "mean_distance_mm": r.mean_distance,
            })
        }
        Command::E2e(a) => {
            set(&mut config.e2e.train_images, a.train_images);
            set(&mut config.e2e.test_images, a.test_images);
            set(&mut config.train.iterations, a.iterations);
            let report = pipeline::run_e2e(&config, &a.out, &log)?;
            let checks = report.checks();
            let mut v = serde_json::to_value(&report)?;
            v["checks"] = json!(checks.iter().map(|c| json!({ "name": c.name, "pass": c.pass })).collect::<Vec<_>>());
            if !cli.quiet && !cli.json {
                for c in &checks {
                    println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
                }
            }
            v
        }
    };
    Ok(out)
}

fn print_human(value: &Value) {
    if let Value::Object(map) = value {
        for (k, v) in map {
            if !matches!(v, Value::Object(_) | Value::Array(_)) {
                println!("{k}: {v}");
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(value) => {
            if cli.json {
                println!("{value}");
            } else if !cli.quiet && !matches!(cli.command, Command::E2e(_)) {
                print_human(&value);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(1)
        }
    }
}

