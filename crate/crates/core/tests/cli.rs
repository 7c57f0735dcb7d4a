use std::path::Path;
use std::process::{Command, Output};

use landau_lab::cli::commands::Manifest;
use sha2::{Digest, Sha256};

const MINIMAL: &str = r#"
gamma = -1.0
t_final = 0.2
snapshot_stride = 2
[grid]
dim = 3
half_extent = 4.0
points = 16
[initial]
kind = "squeezed_gaussian"
sigma = 0.7
[scheme]
kind = "imex"
dt = 0.05
[diagnostics.weights]
levels = 1
"#;

fn landau(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_landau-lab")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, text: &str) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.join("run");
    landau(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

#[test]
fn simulate_writes_a_hashed_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = simulate(tmp.path(), MINIMAL);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = tmp.path().join("run");
    let m = Manifest::load(&run).unwrap();
    assert_eq!(m.snapshots.first().unwrap().step, 0);
    assert!((m.snapshots.last().unwrap().time - 0.2).abs() < 1e-12);
    assert!(m.files.contains_key("ledger.csv"));
    for (name, hash) in &m.files {
        let bytes = std::fs::read(run.join(name)).unwrap();
        assert_eq!(&hex::encode(Sha256::digest(&bytes)), hash, "{name}");
    }
}

#[test]
fn zero_final_time_stores_only_the_initial_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let o = simulate(tmp.path(), &MINIMAL.replace("t_final = 0.2", "t_final = 0.0"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = Manifest::load(&tmp.path().join("run")).unwrap();
    assert_eq!(m.snapshots.len(), 1);
    assert_eq!(m.snapshots[0].time, 0.0);
}

#[test]
fn missing_gamma_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = simulate(tmp.path(), &MINIMAL.replace("gamma = -1.0\n", ""));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("gamma"));
    assert!(!tmp.path().join("run").join("manifest.json").exists());
}

#[test]
fn unknown_names_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    assert_eq!(code(&landau(&["diagnose", "spectra", dir])), 2);
    assert_eq!(code(&landau(&["verify", "medium"])), 2);
    assert_eq!(code(&landau(&["rates", dir, "--theorem", "main_9"])), 2);
    assert_eq!(code(&landau(&["frobnicate"])), 2);
    assert_eq!(code(&landau(&["--help"])), 0);
}

#[test]
fn diagnose_reads_runs_and_bare_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(tmp.path(), MINIMAL)), 0);
    let run = tmp.path().join("run");
    let o = landau(&["diagnose", "weights", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(run.join("weights.json").exists());

    let m = Manifest::load(&run).unwrap();
    let snap = run.join(&m.snapshots.last().unwrap().file);
    let out = tmp.path().join("diag");
    let snap = snap.to_str().unwrap();
    let out = out.to_str().unwrap();
    assert_eq!(code(&landau(&["diagnose", "coefficients", snap, "--out", out])), 2);
    let o = landau(&["diagnose", "coefficients", snap, "--gamma", "-1", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(out).join("coefficients.json")).unwrap()).unwrap();
    assert!(report.is_object());
}

#[test]
fn corrupt_snapshot_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(tmp.path(), MINIMAL)), 0);
    let run = tmp.path().join("run");
    let m = Manifest::load(&run).unwrap();
    let snap = run.join(&m.snapshots[0].file);
    let bytes = std::fs::read(&snap).unwrap();
    std::fs::write(&snap, &bytes[..bytes.len() / 2]).unwrap();
    let o = landau(&["diagnose", "weights", snap.to_str().unwrap(), "--gamma", "-1"]);
    assert_eq!(code(&o), 2);
    std::fs::write(&snap, b"not a snapshot").unwrap();
    assert_eq!(code(&landau(&["diagnose", "weights", snap.to_str().unwrap(), "--gamma", "-1"])), 2);
}

#[test]
fn rates_needs_enough_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&simulate(tmp.path(), MINIMAL)), 0);
    let run = tmp.path().join("run");
    let o = landau(&["rates", run.to_str().unwrap(), "--theorem", "main_1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("snapshots"), "{}", stderr(&o));
}
