use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seploc::pipeline::derive_seed;

fn seploc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seploc")).args(args).output().expect("spawn seploc")
}

fn ok(args: &[&str]) -> String {
    let out = seploc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative path to bytes for every file under `dir`.
fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn assert_same_tree(a: &Path, b: &Path) {
    let (ta, tb) = (tree(a), tree(b));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>(), "{} vs {}", a.display(), b.display());
    for (k, v) in &ta {
        assert!(v == &tb[k], "{} differs", k.display());
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(seploc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(seploc(&["gt", "--out", "x"]).status.code(), Some(2));
    assert_eq!(seploc(&["extract", "--maps", "m", "--out", "o", "--scoring", "median"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = seploc(&["gt", "--run", s(&missing), "--out", s(&tmp.path().join("t"))]);
    assert_eq!(out.status.code(), Some(1));
    let line = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert!(v["error"].is_string() && v["message"].is_string(), "{v}");

    let config = tmp.path().join("bad.toml");
    fs::write(&config, "[groundtruth]\nsigma_px = -1.0\n").unwrap();
    let out = seploc(&["--config", s(&config), "gen", "--out", s(&tmp.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert!(v["error"].is_string());
}

#[test]
fn stages_are_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&["--quiet", "--seed", "3", "gen", "--out", s(dir), "--field-length", "600", "--field-width", "250"]);
    }
    assert_same_tree(&a, &b);
    let targets = tmp.path().join("targets");
    ok(&["--quiet", "gt", "--run", s(&a), "--out", s(&targets)]);
    let first = tree(&targets);
    ok(&["--quiet", "gt", "--run", s(&a), "--out", s(&targets)]);
    assert_eq!(first, tree(&targets));

    let v: serde_json::Value = serde_json::from_str(&ok(&["--json", "gt", "--run", s(&a), "--out", s(&targets)])).unwrap();
    assert_eq!(v["maps"].as_u64().unwrap() as usize, first.len());
}

#[test]
fn e2e_matches_individual_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let seed = 1u64;
    let config = root.join("small.toml");
    fs::write(
        &config,
        "[train]\niterations = 300\n\n[e2e]\ntrain_images = 8\ntest_images = 3\nfield_length_mm = 1200.0\nfield_width_mm = 500.0\n",
    )
    .unwrap();
    let cfg = s(&config);
    let e2e = root.join("e2e");
    let v: serde_json::Value =
        serde_json::from_str(&ok(&["--config", cfg, "--seed", "1", "--json", "e2e", "--out", s(&e2e)])).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 4);
    let me = root.join("manual");
    let extent = ["--field-length", "1200", "--field-width", "500"];
    let seed_of = |tag: u64| derive_seed(seed, tag).to_string();

    // Training field, targets and model.
    let train = me.join("train/field_000");
    let train_seed = seed_of(100);
    let mut args = vec!["--config", cfg, "--quiet", "--seed", &train_seed, "gen", "--out", s(&train)];
    args.extend(["--sensor-seed", "0", "--label", "train000"]);
    args.extend(extent);
    ok(&args);
    ok(&["--quiet", "gt", "--run", s(&train), "--out", s(&train.join("targets")), "--sigma", "4"]);
    assert_same_tree(&e2e.join("train/field_000"), &train);
    let model = me.join("model");
    let train_stage_seed = seed_of(6);
    ok(&[
        "--config", cfg, "--quiet", "--seed", &train_stage_seed, "train", "--run", s(&train), "--targets",
        s(&train.join("targets")), "--out", s(&model), "--max-images", "8",
    ]);
    for f in ["model.sepn", "loss.csv"] {
        assert_eq!(fs::read(e2e.join("model").join(f)).unwrap(), fs::read(model.join(f)).unwrap(), "{f}");
    }

    // Test run, inference, extraction and evaluation.
    let test = me.join("test");
    let test_seed = seed_of(1);
    let mut args = vec!["--config", cfg, "--quiet", "--seed", &test_seed, "gen", "--out"];
    let run = test.join("run");
    args.extend([s(&run), "--sensor-seed", "0", "--label", "test"]);
    args.extend(extent);
    ok(&args);
    let weights = model.join("model.sepn");
    ok(&["--quiet", "infer", "--weights", s(&weights), "--run", s(&run), "--out", s(&test.join("maps")), "--limit", "3"]);
    ok(&["--config", cfg, "--quiet", "extract", "--maps", s(&test.join("maps")), "--out", s(&test.join("detections"))]);
    ok(&[
        "--config", cfg, "--quiet", "eval", "--detections", s(&test.join("detections")), "--annotations",
        s(&run.join("annotations")), "--out", s(&test.join("eval")), "--acceptance", "6",
    ]);
    for d in ["run", "maps", "detections", "eval"] {
        assert_same_tree(&e2e.join("test").join(d), &test.join(d));
    }

    // Both mapping visits and their comparison.
    let map = me.join("map");
    let field_seed = seed_of(2);
    for (name, sensor_tag) in [("a", 3), ("b", 4)] {
        let dir = map.join(name);
        let sensor_seed = seed_of(sensor_tag);
        let truth = map.join("a/run/field_truth.json");
        let mut args = vec!["--config", cfg, "--quiet", "--seed", &field_seed, "gen", "--out"];
        let run = dir.join("run");
        args.extend([s(&run), "--sensor-seed", &sensor_seed, "--label", name]);
        if name == "b" {
            args.extend(["--from", s(&truth), "--epoch", "1"]);
        } else {
            args.extend(extent);
        }
        ok(&args);
        ok(&["--quiet", "infer", "--weights", s(&weights), "--run", s(&run), "--out", s(&dir.join("maps"))]);
        ok(&["--config", cfg, "--quiet", "extract", "--maps", s(&dir.join("maps")), "--out", s(&dir.join("detections"))]);
        let csv = map.join(format!("landmarks_{name}.csv"));
        let tag = if name == "a" { "epoch0" } else { "epoch1" };
        ok(&[
            "--config", cfg, "--quiet", "map", "--detections", s(&dir.join("detections")), "--run", s(&run), "--out",
            s(&csv), "--run-id", name, "--date-tag", tag,
        ]);
        assert_same_tree(&e2e.join("map").join(name), &dir);
        assert_eq!(fs::read(e2e.join("map").join(format!("landmarks_{name}.csv"))).unwrap(), fs::read(&csv).unwrap());
    }
    ok(&[
        "--config", cfg, "--quiet", "compare", s(&map.join("landmarks_a.csv")), s(&map.join("landmarks_b.csv")),
        "--out", s(&map.join("compare")),
    ]);
    assert_same_tree(&e2e.join("map/compare"), &map.join("compare"));
}
