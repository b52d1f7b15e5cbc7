use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn eqg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqg")).args(args).env_remove("EQG_TOL").output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(format!("{}-{name}", std::process::id()))
}

#[test]
fn rmatrix_suite_passes() {
    let out = eqg(&["verify", "--suite", "rmatrix", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["passed"], true);
    assert!(!report["checks"].as_array().unwrap().is_empty());
}

#[test]
fn restricted_spectrum_has_one_eigenvalue_per_walk() {
    let out = eqg(&["irf-spectrum", "--N", "4", "--n", "4", "--w", "0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["data"]["eigenvalues"].as_array().unwrap().len(), 8);
}

#[test]
fn spectrum_contains_bethe_eigenvalue() {
    let out = eqg(&["irf-spectrum", "--N", "4", "--n", "4", "--w", "0.3", "--bethe"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!json(&out)["data"]["bethe_matches"].as_array().unwrap().is_empty());
}

#[test]
fn forced_entries_vanish() {
    let out = eqg(&["vanishing-report", "--N", "4", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let solutions = report["data"]["solutions"].as_array().unwrap();
    assert!(solutions.iter().any(|s| s["degenerate"] == false));
    for check in report["checks"].as_array().unwrap() {
        if check["name"].as_str().unwrap().ends_with("forced entries") {
            assert!(check["value"].as_f64().unwrap() < 1e-8);
        }
    }
}

#[test]
fn tight_tolerance_exits_with_tolerance_code() {
    let out = eqg(&["verify", "--suite", "theta", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["passed"], false);

    let out = Command::new(env!("CARGO_BIN_EXE_eqg")).args(["verify", "--suite", "theta"]).env("EQG_TOL", "1e-30").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inconsistent_eta_is_a_config_error() {
    let out = eqg(&["irf-spectrum", "--N", "4", "--n", "4", "--eta", "0.1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json(&out)["error"]["code"], "invalid_config");
}

#[test]
fn malformed_config_is_a_config_error() {
    let path = scratch("bad.json");
    std::fs::write(&path, r#"{"tau": [0, 1], "unknown_key": 3}"#).unwrap();
    let out = eqg(&["verify", "--suite", "theta", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json(&out)["error"]["exit_code"], 4);

    let out = eqg(&["verify", "--suite", "theta", "--config", "/nonexistent/eqg.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["verify", "--suite", "all", "--seed", "11"];
    let first = eqg(&args);
    let second = eqg(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn flags_override_config_file() {
    let path = scratch("run.json");
    std::fs::write(&path, r#"{"N": 3, "n": 4, "w": [0.2, 0.0], "seed": 5}"#).unwrap();
    let cfg = path.to_str().unwrap();

    let from_file = json(&eqg(&["irf-spectrum", "--config", cfg]));
    assert_eq!(from_file["data"]["N"], 3);
    assert_eq!(from_file["data"]["eigenvalues"].as_array().unwrap().len(), 2);

    let overridden = json(&eqg(&["irf-spectrum", "--config", cfg, "--N", "4"]));
    assert_eq!(overridden["data"]["N"], 4);
    assert_eq!(overridden["data"]["eigenvalues"].as_array().unwrap().len(), 8);
}

#[test]
fn output_flag_writes_report_file() {
    let path = scratch("out.json");
    let out = eqg(&["rmatrix", "--lambdas", "1;1", "--m", "1", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["command"], "rmatrix");
}
