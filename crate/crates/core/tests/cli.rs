//! Runs the built binary.

use std::path::Path;
use std::process::Command;

fn bluegraph(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bluegraph")).args(args).output().unwrap()
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap();
    full.extend(["--out", p]);
    let out = bluegraph(&full);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(&path).unwrap()
}

#[test]
fn theory_prints_the_budget_plan() {
    let out = bluegraph(&["theory", "--d", "2", "--delta", "0.5", "--eps", "0.1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["k1"], 19);
    assert_eq!(v["k2"], 246);
    assert_eq!(v["k3"], 16);
    assert_eq!(v["c_total"], 282);
    for key in ["alpha_d", "p_d", "cstar", "penrose_radius", "lower_bound_c", "delta", "eps", "d"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn theory_reports_null_outside_the_domain() {
    let out = bluegraph(&["theory", "--n", "2", "--d", "2", "--delta", "0.5"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["cstar"].is_null());
    assert!(v["penrose_radius"].is_null());
}

#[test]
fn two_points_connect() {
    let out = bluegraph(&["connect", "--n", "2", "--d", "1", "--r", "1", "--c", "1", "--seed", "7"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["connected"], true);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bluegraph(&["sweep-c", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(bluegraph(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bluegraph(&["sweep-c", "--n", "10", "--c-list", "1,2"]).status.code(), Some(2));
    assert_eq!(bluegraph(&["sweep-c", "--n", "10", "--r", "0.2", "--c-list", "2,1"]).status.code(), Some(2));
    assert_eq!(bluegraph(&["sweep-c", "--n", "10", "--r", "0.2", "--c-list", "1", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn sweep_c_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep-c", "--n", "500", "--d", "2", "--r", "0.75", "--c-list", "1,2,3", "--trials", "100", "--seed", "1"];
    let a = run_to(dir.path(), "a.csv", &args);
    let b = run_to(dir.path(), "b.csv", &args);
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("param,value,successes,trials,p_hat,ci_low,ci_high\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn json_output_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["clique-scan", "--n", "150", "--r", "0.08", "--c-list", "1,2", "--trials", "20", "--format", "json"];
    let bytes = run_to(dir.path(), "rec.json", &args);
    let rec = bluegraph::harness::ExperimentRecord::read_json(&bytes[..]).unwrap();
    assert_eq!(rec.rows.len(), 2);
    assert_eq!(rec.config.trials, 20);
}
