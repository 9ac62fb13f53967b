use std::path::Path;
use std::process::{Command, Output};

fn tdqmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdqmc")).args(args).env("RUST_LOG", "error").output().unwrap()
}

fn with_config(dir: &Path, mode: &str, json: &str) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, json).unwrap();
    let out = dir.join("out");
    tdqmc(&[mode, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

const SMALL: &str = r#""walkers": 30, "grid": {"prepare": {"half_width": 10, "dx": 0.4}}, "prep": {"tol_energy": 10, "window": 5}"#;

#[test]
fn small_preparation_succeeds_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let json = format!(r#"{{{SMALL}, "steps": {{"tau_total": 1}}}}"#);
    let out = with_config(dir.path(), "prepare", &json);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("energy = "));
    for f in ["summary.json", "resolved_config.json", "energy_trace.csv", "walkers.csv", "densities.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f} missing");
    }
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = with_config(dir.path(), "prepare", "{\"walkers\": 10,\n  \"alpha\": [1, }");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn unknown_keys_and_bad_values_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(with_config(dir.path(), "prepare", r#"{"walker": 10}"#).status.code(), Some(2));
    assert_eq!(with_config(dir.path(), "prepare", r#"{"walkers": 1}"#).status.code(), Some(2));
    assert_eq!(with_config(dir.path(), "prepare", r#"{"steps": {"dt_real": -0.1}}"#).status.code(), Some(2));
    assert_eq!(with_config(dir.path(), "prepare", r#"{"alpha": [1]}"#).status.code(), Some(2));
}

#[test]
fn laser_mode_without_pulse_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(with_config(dir.path(), "compare-fig3", "{}").status.code(), Some(2));
    assert_eq!(tdqmc(&["prepare", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn unconverged_preparation_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let json = r#"{"walkers": 30, "grid": {"prepare": {"half_width": 10, "dx": 0.4}},
                   "steps": {"tau_total": 0.1}, "prep": {"tol_energy": 1e-12}}"#;
    let out = with_config(dir.path(), "prepare", json);
    assert_eq!(out.status.code(), Some(3));
    let marker = std::fs::read_to_string(dir.path().join("out/FAILED")).unwrap();
    assert!(!marker.trim().is_empty());
}
