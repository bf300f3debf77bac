// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

const SMALL: &str = "\
circuits = 8
patterns_per_circuit = 32
iterations = 100
landmark_cap = 64
";

fn tvopt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvopt"))
        .args(args)
        .arg("--config")
        .arg(dir.join("run.toml"))
        .arg("--out")
        .arg(dir.join("out"))
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = tvopt(dir, args);
    assert!(
        out.status.success(),
        "tvopt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn workspace(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn summary_field(csv: &str, field: &str) -> f64 {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == field).unwrap();
    values[i].parse().unwrap()
}

fn full_pipeline(dir: &Path) {
    for cmd in ["generate", "train", "evaluate", "oracle-eval", "sweep"] {
        ok(dir, &[cmd]);
    }
}

#[test]
fn smoke_pipeline_writes_every_artifact() {
    let ws = workspace(SMALL);
    let start = Instant::now();
    full_pipeline(ws.path());
    assert!(
        start.elapsed() < Duration::from_secs(5),
        "{:?}",
        start.elapsed()
    );

    let out = ws.path().join("out");
    for name in [
        "config.toml",
        "circuits.csv",
        "traces.csv",
        "dataset.csv",
        "model.txt",
        "report.csv",
        "summary.csv",
        "oracle_report.csv",
        "oracle_summary.csv",
        "sweep_alpha.csv",
        "beta_weights.csv",
        "learning_curve.csv",
        "netlists/c0000.bench",
        "dictionaries/c0007.dict",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    assert_eq!(
        summary_field(&read(ws.path(), "oracle_summary.csv"), "diagnosis_accuracy"),
        1.0
    );
    let acc = summary_field(&read(ws.path(), "summary.csv"), "diagnosis_accuracy");
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(read(ws.path(), "sweep_alpha.csv").lines().count(), 5);
    assert_eq!(read(ws.path(), "beta_weights.csv").lines().count(), 5);
    assert!(read(ws.path(), "dataset.csv").starts_with("circuit_id,x1,x2,x3,x4,x5,y\n"));
}

#[test]
fn written_config_reproduces_the_run() {
    let ws = workspace(SMALL);
    ok(ws.path(), &["generate"]);
    let written = read(ws.path(), "config.toml");
    let again = workspace(&written);
    ok(again.path(), &["generate"]);
    assert_eq!(
        read(ws.path(), "dataset.csv"),
        read(again.path(), "dataset.csv")
    );
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = workspace(SMALL);
    let b = workspace(SMALL);
    full_pipeline(a.path());
    full_pipeline(b.path());
    for name in [
        "dataset.csv",
        "traces.csv",
        "model.txt",
        "report.csv",
        "summary.csv",
        "sweep_alpha.csv",
        "learning_curve.csv",
        "dictionaries/c0003.dict",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn seed_flag_changes_the_corpus() {
    let ws = workspace(SMALL);
    ok(ws.path(), &["generate"]);
    let first = read(ws.path(), "dataset.csv");
    ok(ws.path(), &["generate", "--seed", "12345"]);
    assert_ne!(first, read(ws.path(), "dataset.csv"));
}

#[test]
fn evaluate_refuses_overlapping_circuits() {
    let ws = workspace(SMALL);
    ok(ws.path(), &["generate"]);
    ok(ws.path(), &["train"]);
    // six of eight circuits were used for training; a 2/8 training share
    // leaves six test circuits, so some must overlap
    let overlap = format!("{SMALL}train_fraction = 0.25\n");
    fs::write(ws.path().join("run.toml"), overlap).unwrap();
    let out = tvopt(ws.path(), &["evaluate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("both the training and the test set"));
}

#[test]
fn model_and_tau_flags_override_the_config() {
    let ws = workspace(SMALL);
    ok(ws.path(), &["generate"]);
    ok(
        ws.path(),
        &[
            "train", "--model", "linear", "--alpha", "0.01", "--tau", "0.8",
        ],
    );
    let model = read(ws.path(), "model.txt");
    assert!(model.contains("kind linear"), "{model}");
    assert!(model.lines().any(|l| l == "tau 0.8"), "{model}");
    ok(ws.path(), &["evaluate"]);
    assert_eq!(summary_field(&read(ws.path(), "summary.csv"), "tau"), 0.8);
}

#[test]
fn bad_input_fails_cleanly() {
    let ws = workspace("circuits = 8\nunknown_key = 1\n");
    let out = tvopt(ws.path(), &["generate"]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let ws = workspace(SMALL);
    let out = tvopt(ws.path(), &["train"]);
    assert!(!out.status.success(), "train without a dataset must fail");

    let out = tvopt(ws.path(), &["generate", "--tau", "2"]);
    assert!(!out.status.success());
}

#[test]
fn netlist_directory_input() {
    let ws = workspace("");
    let nets = ws.path().join("nets");
    fs::create_dir(&nets).unwrap();
    fs::write(
        nets.join("c17.bench"),
        "INPUT(1)\nINPUT(2)\nINPUT(3)\nINPUT(6)\nINPUT(7)\nOUTPUT(22)\nOUTPUT(23)\n\
         10 = NAND(1, 3)\n11 = NAND(3, 6)\n16 = NAND(2, 11)\n19 = NAND(11, 7)\n\
         22 = NAND(10, 16)\n23 = NAND(16, 19)\n",
    )
    .unwrap();
    let cfg = format!(
        "netlist_dir = \"{}\"\ncircuits = 6\nexhaustive = true\n",
        nets.display()
    );
    fs::write(ws.path().join("run.toml"), cfg).unwrap();
    ok(ws.path(), &["generate"]);
    let manifest = read(ws.path(), "circuits.csv");
    assert_eq!(manifest.lines().count(), 7);
    assert!(manifest
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("c17_0000,5,6,32,"));
    assert!(!ws.path().join("out/netlists").exists());
}
