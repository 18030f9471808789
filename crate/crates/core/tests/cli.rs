mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::config_path;
use qetlab::cli::RunConfig;

fn qetlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qetlab")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_prints_usage() {
    let out = qetlab(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Usage"));
    for cmd in ["density1d", "density3d", "optimize", "scale-check", "equiv-check", "oracle-check"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn density1d_writes_one_csv_per_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("fig1_lorentzian.json");
    let out = qetlab(&["density1d", "--config", arg(&cfg), "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.len(), 5);
    assert!(names.iter().any(|n| n.contains("15.29minus")));
    let after = names.iter().find(|n| n.contains("15.29plus")).unwrap();
    let text = fs::read_to_string(dir.path().join(after)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,total,alice,bob,qet");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 1601);
    let mut near_bob = rows.iter().filter(|r| (r[0] - 15.29).abs() < 0.5576);
    assert!(near_bob.any(|r| r[1] < 0.0));

    let before = names.iter().find(|n| n.contains("15.29minus")).unwrap();
    let text = fs::read_to_string(dir.path().join(before)).unwrap();
    for l in text.lines().skip(1) {
        let r: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!((r[3], r[4]), (0.0, 0.0));
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = config_path("fig1_lorentzian.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = qetlab(&["density1d", "--config", arg(&cfg), "--out", arg(d.path()), "--times", "20,15.29+"]);
        assert_eq!(out.status.code(), Some(0));
    }
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn precision_flag_controls_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("fig1_lorentzian.json");
    let out = qetlab(&["density1d", "--config", arg(&cfg), "--out", arg(dir.path()), "--times", "20", "--precision", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let file = fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(file).unwrap();
    let cell = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string();
    let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.len(), 5, "{cell}");
}

#[test]
fn density3d_on_the_shell_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("fig3_gaussian.json");
    let out = qetlab(&["density3d", "--config", arg(&cfg), "--out", arg(dir.path()), "--times", "24.95"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let file = fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(file).unwrap();
    assert!(text.starts_with("r,total,alice,bob,qet\n"));
    let totals: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(totals.iter().any(|&v| v < 0.0));
}

#[test]
fn density3d_rejects_a_one_dimensional_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = qetlab(&["density3d", "--config", arg(&config_path("fig1_lorentzian.json")), "--out", arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimize_reports_a_negative_window_energy() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("opt.json");
    let out = qetlab(&["optimize", "--config", arg(&config_path("fig1_lorentzian.json")), "--out", arg(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_report(&report);
    let best = v["best_objective"].as_f64().unwrap();
    assert!(best < 0.0 && best < v["baseline_objective"].as_f64().unwrap());
    assert_eq!(v["well"]["flanked"], serde_json::Value::Bool(true));
    for key in ["bob_position", "bob_delta", "alice_amplitude", "bob_amplitude"] {
        assert!(v["best_params"][key].is_number(), "{key}");
    }
    let trace = v["trace"].as_array().unwrap();
    assert!(!trace.is_empty());
}

#[test]
fn scale_check_passes_on_fig1() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("scale.json");
    let out = qetlab(&["scale-check", "--config", arg(&config_path("fig1_lorentzian.json")), "--out", arg(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_report(&report);
    assert_eq!(v["pass"], serde_json::Value::Bool(true), "{v}");
}

#[test]
fn equiv_check_passes_on_fig1() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("equiv.json");
    let out = qetlab(&["equiv-check", "--config", arg(&config_path("fig1_lorentzian.json")), "--out", arg(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_report(&report);
    assert_eq!(v["pass"], serde_json::Value::Bool(true), "{v}");
    assert_eq!(v["sigma_y_eigenstate"], serde_json::Value::Bool(true));
}

#[test]
fn oracle_check_passes_on_fig1() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("oracle.json");
    let out = qetlab(&["oracle-check", "--config", arg(&config_path("fig1_lorentzian.json")), "--out", arg(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_report(&report);
    assert!(v["max_relative_deviation"].as_f64().unwrap() <= 1e-6, "{v}");
    assert_eq!(v["convergence"]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn reports_go_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    let mut rc = RunConfig::load(&config_path("fig1_lorentzian.json")).unwrap();
    rc.grid.points = 41;
    rc.grid.min = 30.0;
    rc.grid.max = 40.0;
    rc.times.clear();
    fs::write(&cfg, serde_json::to_string(&rc).unwrap()).unwrap();
    let out = qetlab(&["equiv-check", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["branch_residual"].is_number());
}

#[test]
fn malformed_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = dir.path().join("bad.json");
    fs::write(&bad_json, "{ not json").unwrap();
    let mut rc = serde_json::to_value(RunConfig::load(&config_path("fig1_lorentzian.json")).unwrap()).unwrap();
    rc["protocol"]["bob"]["delta"] = serde_json::json!(-1.0);
    let negative = dir.path().join("negative.json");
    fs::write(&negative, rc.to_string()).unwrap();
    rc["protocol"]["bob"]["delta"] = serde_json::json!(0.5);
    rc["grid"]["spacing"] = serde_json::json!(0.1);
    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, rc.to_string()).unwrap();
    let missing = dir.path().join("missing.json");

    for (path, needle) in [(&bad_json, "config"), (&negative, "delta"), (&unknown, "spacing"), (&missing, "missing.json")] {
        let out = qetlab(&["density1d", "--config", arg(path), "--out", arg(dir.path())]);
        assert_eq!(out.status.code(), Some(2), "{}", path.display());
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{err}");
    }
}

#[test]
fn usage_errors_exit_with_code_2() {
    let cfg = config_path("fig1_lorentzian.json");
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qetlab(&["density1d"]).status.code(), Some(2));
    assert_eq!(qetlab(&["frobnicate"]).status.code(), Some(2));
    let out = qetlab(&["density1d", "--config", arg(&cfg), "--out", arg(dir.path()), "--times", ""]);
    assert_eq!(out.status.code(), Some(2));
    let out = qetlab(&["density1d", "--config", arg(&cfg), "--out", arg(dir.path()), "--times", "soon"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bundled_configs_round_trip() {
    for entry in fs::read_dir(config_path("")).unwrap() {
        let path = entry.unwrap().path();
        let rc = RunConfig::load(&path).unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&rc).unwrap()).unwrap();
        assert_eq!(rc, again, "{}", path.display());
    }
}
