//! The `strata` binary: exit codes, report formats, configuration handling.

use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn strata(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strata")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("strata-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn algebra_report_is_json_and_passes() {
    let out = strata(&["verify", "algebra"]);
    assert_eq!(out.status.code(), Some(0));
    let js: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(js["schema"], "report_v1");
    assert_eq!(js["suite"], "algebra");
    assert_eq!(js["pass"], true);
    let claims = js["claims"].as_array().unwrap();
    assert_eq!(claims.len(), 5);
    for c in claims {
        for key in ["claim", "predicted", "measured", "stderr", "pass"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = strata(&["verify", "algebra", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(strata(&["verify"]).status.code(), Some(2));
    assert_eq!(strata(&["verify", "algebra", "--samples", "ten"]).status.code(), Some(2));
}

#[test]
fn spectrum_emits_csv_table() {
    let out = strata(&["spectrum", "--k", "0", "--n", "1", "--m", "1", "--eps", "1,0.1", "--count", "3", "--grid-n", "512"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,n,m,eps,j,lambda,refinement_delta");
    assert_eq!(lines.len(), 7);
    let lam: f64 = lines[1].split(',').nth(5).unwrap().parse().unwrap();
    assert!((lam - 35.41).abs() < 0.05, "{lam}");
    let js = strata(&["spectrum", "--eps", "0.5", "--count", "2", "--grid-n", "256", "--format", "json"]);
    let js: Value = serde_json::from_slice(&js.stdout).unwrap();
    assert_eq!(js["spectrum"].as_array().unwrap().len(), 2);
}

#[test]
fn identical_configs_give_identical_reports() {
    let args = ["verify", "sv", "--M", "1", "--samples", "4000", "--seed", "3", "--set", "batches=20"];
    let a = strata(&args);
    let b = strata(&args);
    let c = Command::new(env!("CARGO_BIN_EXE_strata")).args(args).env("STRATA_THREADS", "1").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let js: Value = serde_json::from_slice(&a.stdout).unwrap();
    let pass = js["pass"].as_bool().unwrap();
    assert_eq!(a.status.code(), Some(if pass { 0 } else { 1 }));
    assert_eq!(js["config"]["seed"], 3);
    let other = strata(&["verify", "sv", "--M", "1", "--samples", "4000", "--seed", "4", "--set", "batches=20"]);
    assert_ne!(a.stdout, other.stdout);
    let alias = strata(&["sv-verify", "--M", "1", "--samples", "4000", "--seed", "3", "--set", "batches=20"]);
    let alias: Value = serde_json::from_slice(&alias.stdout).unwrap();
    assert_eq!(alias["claims"], js["claims"]);
}

#[test]
fn config_file_and_flag_overrides() {
    let path = scratch("run.conf");
    std::fs::write(&path, "# desk run\nsamples = 5000\nsv_m = 1,2\nseed = 11\n").unwrap();
    let out = strata(&["config", "--config", path.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("samples = 5000"));
    assert!(text.contains("sv_m = 1,2"));
    assert!(text.contains("seed = 9"));
    // the printed configuration reads back to itself
    let again = scratch("again.conf");
    std::fs::write(&again, &text).unwrap();
    let out2 = strata(&["config", "--config", again.to_str().unwrap()]);
    assert_eq!(String::from_utf8(out2.stdout).unwrap(), text);
    std::fs::write(&path, "samples: 5000\n").unwrap();
    assert_eq!(strata(&["config", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn output_path_receives_the_report() {
    let path = scratch("algebra.csv");
    let out = strata(&["verify", "algebra", "--format", "csv", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("id,criterion,claim,predicted,measured,stderr,pass"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn failing_claims_exit_one_and_are_listed() {
    let out = strata(&["verify", "fourier", "--samples", "4000", "--set", "batches=20"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("failing claim"));
    assert!(err.contains("c6.stated.k0.M1.m1"));
    let js: Value = serde_json::from_slice(&out.stdout).unwrap();
    let claims = js["claims"].as_array().unwrap();
    assert!(claims.iter().filter(|c| c["id"].as_str().unwrap().starts_with("sv.coefficients.corrected")).all(|c| c["pass"] == true));
    assert!(claims.iter().filter(|c| c["id"].as_str().unwrap().starts_with("c6.vanishing")).all(|c| c["pass"] == true));
}
