//! Contract tests for the `toriclab` binary: exit codes, report payloads,
//! override mechanics, and the describe subcommand.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toriclab"))
}

/// Fresh scratch directory for one test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("toriclab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

fn write_config(dir: &PathBuf, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).expect("write config");
    path
}

fn run_with(config: &PathBuf, out: &PathBuf, overrides: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.arg("run").arg("--config").arg(config).arg("--out").arg(out);
    for ov in overrides {
        cmd.arg("--override").arg(ov);
    }
    cmd.output().expect("spawn binary")
}

fn report(out: &PathBuf) -> serde_json::Value {
    let text = std::fs::read_to_string(out.join("report.json")).expect("read report");
    serde_json::from_str(&text).expect("parse report")
}

const EXPERIMENTS: [&str; 13] = [
    "envelope",
    "equilibrium",
    "exhaustion",
    "bergman-converge",
    "bergman-measure",
    "h0-growth",
    "section-H",
    "phong-sturm",
    "geodesic",
    "ray-envelope",
    "product",
    "pushforward",
    "suite",
];

#[test]
fn passing_run_exits_zero_with_payload() {
    let dir = scratch("pass");
    let config = write_config(&dir, "{\"experiment\": \"envelope\"}");
    let out = dir.join("out");
    let result = run_with(&config, &out, &[]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    for file in ["phi.csv", "envelope.csv", "contact.csv", "report.json", "meta.json"] {
        assert!(out.join(file).is_file(), "missing output file {file}");
    }
    let rep = report(&out);
    assert_eq!(rep["experiment"], "envelope");
    assert_eq!(rep["passed"], true);
    assert!(rep["failures"].as_array().unwrap().is_empty());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn tolerance_failure_exits_two_with_machine_readable_failures() {
    let dir = scratch("fail");
    let config = write_config(&dir, "{\"experiment\": \"equilibrium\"}");
    let out = dir.join("out");
    // An impossibly tight mass tolerance forces a clean tolerance failure.
    let result = run_with(&config, &out, &["tolerances.equilibrium_mass=1e-9"]);
    assert_eq!(result.status.code(), Some(2), "expected tolerance-failure exit");
    let rep = report(&out);
    assert_eq!(rep["passed"], false);
    let failures = rep["failures"].as_array().unwrap();
    assert!(!failures.is_empty(), "failures list must name what broke");
    assert!(
        failures[0].as_str().unwrap().contains("exceeds"),
        "failure entries carry the measured value and the bound: {failures:?}"
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = scratch("unknown-key");
    let config = write_config(&dir, "{\"experiment\": \"envelope\", \"bogus\": 1}");
    let out = dir.join("out");
    let result = run_with(&config, &out, &[]);
    assert_eq!(result.status.code(), Some(1), "expected config-error exit");
    assert!(
        String::from_utf8_lossy(&result.stderr).contains("configuration error"),
        "stderr names the error class"
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn missing_config_file_exits_one() {
    let dir = scratch("missing");
    let out = dir.join("out");
    let result = run_with(&dir.join("absent.json"), &out, &[]);
    assert_eq!(result.status.code(), Some(1), "expected config-error exit");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn overrides_reach_the_stored_config() {
    let dir = scratch("override");
    let config = write_config(&dir, "{\"experiment\": \"envelope\"}");
    let out = dir.join("out");
    let result = run_with(&config, &out, &["grid.points=65", "lambda=0.25"]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let rep = report(&out);
    assert_eq!(rep["config"]["grid"]["points"], 65);
    assert_eq!(rep["config"]["lambda"], 0.25);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn section_count_table_matches_known_rows() {
    let dir = scratch("h0");
    let config = write_config(&dir, "{\"experiment\": \"h0-growth\"}");
    let out = dir.join("out");
    let result = run_with(&config, &out, &["k_schedule=[10,100]"]);
    assert!(
        result.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let csv = std::fs::read_to_string(out.join("h0.csv")).expect("read table");
    // Interval at level one-half: 6 of 11 monomials at degree 10, 51 of 101
    // at degree 100.
    assert!(csv.lines().any(|l| l.starts_with("10,6,0.6,")), "csv:\n{csv}");
    assert!(csv.lines().any(|l| l.starts_with("100,51,0.51,")), "csv:\n{csv}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn describe_covers_every_experiment() {
    for name in EXPERIMENTS {
        let result = bin().arg("describe").arg(name).output().expect("spawn binary");
        assert!(result.status.success(), "describe {name} failed");
        let text = String::from_utf8_lossy(&result.stdout);
        assert!(
            text.trim().len() > 40,
            "describe {name} should state the claim being tested, got: {text}"
        );
    }
    let result = bin().arg("describe").arg("nonesuch").output().expect("spawn binary");
    assert_eq!(result.status.code(), Some(1), "unknown name is an error");
    let listing = String::from_utf8_lossy(&result.stderr);
    assert!(
        listing.contains("envelope") && listing.contains("suite"),
        "error output lists the known names: {listing}"
    );
}
