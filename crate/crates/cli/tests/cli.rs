//! End-to-end tests of the `nbeddyn` binary: artifact layout, CSV format,
//! reproducibility, and error reporting.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_nbeddyn");

const CONFIG: &str = r#"
schema_version = 1
run_name = "itest"
seed = 0

[dataset]
system = "lorenz63"
dt = 0.01
steps = 1500
transient = 200
train_len = 1000
noise_sigma = 0.01

[model]
d_e = 4
epochs = 50
snapshot_every = 25

[inference]
window = 30
iterations = 20

[evaluation]
horizons = [1]
test_windows = 3
generation_steps = 200
"#;

fn run_in(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg_path = dir.join("cfg.toml");
    std::fs::write(&cfg_path, config).unwrap();
    Command::new(BIN)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.join("runs"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn simulate_writes_the_documented_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), CONFIG, &["simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = std::fs::read_to_string(dir.path().join("runs/itest/data/truth.csv")).unwrap();
    let mut lines = truth.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,x3");
    assert_eq!(lines.count(), 1500);
    let observed =
        std::fs::read_to_string(dir.path().join("runs/itest/data/observed.csv")).unwrap();
    assert!(observed.starts_with("t,x1\n"));
}

#[test]
fn invalid_config_names_the_key_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CONFIG.replace("dt = 0.01", "dt = 0.0");
    let out = run_in(dir.path(), &bad, &["simulate"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dataset.dt"), "{err}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for d in [dir_a.path(), dir_b.path()] {
        let out = run_in(d, CONFIG, &["--quiet", "simulate"]);
        assert!(out.status.success());
        assert!(out.stdout.is_empty(), "quiet run printed output");
    }
    for f in ["data/truth.csv", "data/observed.csv"] {
        let a = std::fs::read(dir_a.path().join("runs/itest").join(f)).unwrap();
        let b = std::fs::read(dir_b.path().join("runs/itest").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
}

#[test]
fn train_writes_model_loss_history_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), CONFIG, &["train"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("runs/itest");
    assert!(root.join("models/model.json").is_file());
    let loss = std::fs::read_to_string(root.join("reports/loss_history.csv")).unwrap();
    assert!(loss.starts_with("epoch,loss\n"));
    assert_eq!(loss.lines().count(), 51);
    assert!(root.join("figures/latents_epoch_000025.svg").is_file());
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out0 = run_in(dir.path(), CONFIG, &["train"]);
    assert!(out0.status.success());
    let model0 = std::fs::read(dir.path().join("runs/itest/models/model.json")).unwrap();
    let out1 = run_in(dir.path(), CONFIG, &["--seed", "7", "train"]);
    assert!(out1.status.success());
    let model1 = std::fs::read(dir.path().join("runs/itest/models/model.json")).unwrap();
    assert_ne!(model0, model1, "different seeds produced identical models");
}

#[test]
fn forecast_round_trips_through_a_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), CONFIG, &["simulate"]).status.success());
    assert!(run_in(dir.path(), CONFIG, &["train"]).status.success());
    let root = dir.path().join("runs/itest");
    // carve an observation window out of the generated test segment
    let observed = std::fs::read_to_string(root.join("data/observed.csv")).unwrap();
    let lines: Vec<&str> = observed.lines().collect();
    let window: Vec<&str> = std::iter::once(lines[0])
        .chain(lines[1101..1131].iter().copied())
        .collect();
    let window_path = dir.path().join("window.csv");
    std::fs::write(&window_path, window.join("\n") + "\n").unwrap();
    let out = run_in(
        dir.path(),
        CONFIG,
        &[
            "forecast",
            "--model",
            root.join("models/model.json").to_str().unwrap(),
            "--obs",
            window_path.to_str().unwrap(),
            "--horizon",
            "10",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fc = std::fs::read_to_string(root.join("reports/forecast.csv")).unwrap();
    assert!(fc.starts_with("t,x1\n"));
    assert_eq!(fc.lines().count(), 11);
    assert!(root.join("figures/forecast.svg").is_file());
}

#[test]
fn forecast_rejects_zero_horizon() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), CONFIG, &["train"]).status.success());
    let root = dir.path().join("runs/itest");
    let out = run_in(
        dir.path(),
        CONFIG,
        &[
            "forecast",
            "--model",
            root.join("models/model.json").to_str().unwrap(),
            "--obs",
            root.join("models/model.json").to_str().unwrap(),
            "--horizon",
            "0",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn spectrum_rejects_a_corrupt_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("model.json");
    std::fs::write(&bogus, "{\"schema_version\": 999}").unwrap();
    let out = run_in(
        dir.path(),
        CONFIG,
        &["spectrum", "--model", bogus.to_str().unwrap()],
    );
    assert!(!out.status.success());
}

#[test]
fn env_override_changes_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(&cfg_path, CONFIG).unwrap();
    let out = Command::new(BIN)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("runs"))
        .arg("simulate")
        .env("NBEDDYN_DATASET__STEPS", "1200")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = std::fs::read_to_string(dir.path().join("runs/itest/data/truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 1201);
}

#[test]
fn benchmark_writes_the_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{CONFIG}\n[baselines.analog]\ntau = [5]\nd_e = [3]\nk = 10\n\n\
         [baselines.sparse]\nthreshold = 0.05\ntau = [5]\nd_e = 3\n"
    );
    let out = run_in(dir.path(), &cfg, &["benchmark"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table =
        std::fs::read_to_string(dir.path().join("runs/itest/reports/benchmark.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "method,params,rmse_h1,lambda1");
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 3);
    assert!(body[0].starts_with("nbeddyn,"));
    assert!(body[1].starts_with("analog,"));
    assert!(body[2].starts_with("sparse,"));
}
