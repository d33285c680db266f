use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn passreg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passreg")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn verdict(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("verdict.json")).unwrap()).unwrap()
}

fn check<'a>(v: &'a Value, name: &str) -> &'a Value {
    v["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn csv_column(path: &Path, col: usize) -> Vec<f64> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn unknown_example_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = passreg(&["example", "wave"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid value"));
}

#[test]
fn wave_boundary_example_passes_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let run = |dir: &str| passreg(&["example", "wave-boundary", "--out", dir], tmp.path());
    let first = run("a");
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stdout));
    assert!(run("b").status.success());
    let a = tmp.path().join("a");
    for f in ["trajectory.csv", "error_integral.csv", "resolvent_scan.csv", "error.svg", "error_integral.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
    let head = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert!(head.starts_with("t,error_norm,state_norm\n"));
    let v = verdict(&a);
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["decay"]["kind"], "Exponential");
    assert_eq!(v["hypotheses"]["theorem"], "exponential");
    for c in v["checks"].as_array().unwrap() {
        for key in ["name", "pass", "value", "threshold", "detail"] {
            assert!(c.get(key).is_some(), "{key} missing in {c}");
        }
    }
}

#[test]
fn exit_code_matches_verdict() {
    let tmp = TempDir::new().unwrap();
    let out = passreg(&["example", "wave-distributed", "--out", "o"], tmp.path());
    let v = verdict(&tmp.path().join("o"));
    let all_pass = v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true);
    assert_eq!(v["all_pass"], all_pass);
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 1 }));
}

#[test]
fn verify_heat_predicts_polynomial_decay() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "heat.json",
        r#"{"example": "heat-2d",
            "thresholds": {"expected_necessity": "unbounded", "expected_decay": "polynomial", "decay_alpha_band": [1.2, 2.2]}}"#,
    );
    let out = passreg(&["verify", "--config", "heat.json", "--out", "v"], tmp.path());
    let v = verdict(&tmp.path().join("v"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(v["decay"]["kind"], "Polynomial");
    assert!((v["decay"]["alpha"].as_f64().unwrap() - 1.7).abs() < 1e-9);
    assert!(check(&v, "necessity")["detail"].as_str().unwrap().contains("Unbounded"));
    assert!(!tmp.path().join("v/resolvent_scan.csv").exists());
}

#[test]
fn verify_wave_boundary_predicts_exponential_decay() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "wave.json", r#"{"example": "wave-boundary", "thresholds": {"expected_decay": "exponential"}}"#);
    let out = passreg(&["verify", "--config", "wave.json", "--out", "v"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(verdict(&tmp.path().join("v"))["decay"]["kind"], "Exponential");
}

const TWO_TONES: &str = r#"[
  {"omega": 3.141592653589793, "y_ref": [[0.0, -0.5]], "w_dist": []},
  {"omega": -3.141592653589793, "y_ref": [[0.0, 0.5]], "w_dist": []},
  {"omega": 6.283185307179586, "y_ref": [[0.125, 0.0]], "w_dist": []},
  {"omega": -6.283185307179586, "y_ref": [[0.125, 0.0]], "w_dist": []}
]"#;

#[test]
fn missing_frequency_fails_internal_model() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "signal.json", TWO_TONES);
    let cfg = |freqs: &str| {
        format!(
            r#"{{"plant": {{"model": "wave-distributed", "N": 12}},
                "controller": {{"recipe": "fin-dim-real", "frequencies": {freqs}, "gain": 3, "d_c1": 34, "d_c2": 1}},
                "signal": {{"file": "signal.json"}},
                "analysis": ["passivity", "contraction", "internal_model"]}}"#
        )
    };
    write(tmp.path(), "bad.json", &cfg("[3.141592653589793]"));
    write(tmp.path(), "good.json", &cfg("[3.141592653589793, 6.283185307179586]"));
    let bad = passreg(&["verify", "--config", "bad.json", "--out", "b"], tmp.path());
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(check(&verdict(&tmp.path().join("b")), "internal_model")["pass"], false);
    let good = passreg(&["verify", "--config", "good.json", "--out", "g"], tmp.path());
    assert!(good.status.success(), "{}", String::from_utf8_lossy(&good.stdout));
}

#[test]
fn zero_signal_from_zero_state_gives_zero_trajectory() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "empty.json", "[]");
    write(
        tmp.path(),
        "cfg.json",
        r#"{"plant": {"model": "wave-boundary", "N": 10},
            "controller": {"recipe": "transport", "cells": 9, "d_c1": 1, "d_c2": 1},
            "signal": {"file": "empty.json"}, "t_final": 3, "dt": 0.01}"#,
    );
    let out = passreg(&["simulate", "--config", "cfg.json", "--out", "s"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let s = tmp.path().join("s");
    let e = csv_column(&s.join("trajectory.csv"), 1);
    assert_eq!(e.len(), 301);
    assert!(e.iter().chain(&csv_column(&s.join("trajectory.csv"), 2)).all(|v| *v == 0.0));
}

#[test]
fn scan_of_decoupled_toy_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "plant.json",
        r#"{"n": 1, "m": 1, "m_d": 0, "p": 1, "label": "toy",
            "a": [[[-1.0, 0.0]]], "b": [[[0.0, 0.0]]], "b_d": [[]], "c": [[[0.0, 0.0]]], "d": [[[0.0, 0.0]]]}"#,
    );
    write(tmp.path(), "empty.json", "[]");
    write(
        tmp.path(),
        "cfg.json",
        r#"{"plant": {"file": "plant.json"},
            "controller": {"recipe": "fin-dim", "frequencies": [2.0]},
            "signal": {"file": "empty.json"},
            "scan": {"omega_min": 0.5, "omega_max": 10, "samples": 50, "refine": "none"}}"#,
    );
    let out = passreg(&["scan", "--config", "cfg.json", "--out", "s"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let path = tmp.path().join("s/resolvent_scan.csv");
    let (w, r) = (csv_column(&path, 0), csv_column(&path, 1));
    assert_eq!(w.len(), 50);
    for (w, r) in w.iter().zip(&r) {
        // diag(-1, 2i): the larger of 1/|iω + 1| and 1/|ω - 2|.
        let exact = (1.0 / (w * w + 1.0).sqrt()).max(1.0 / (w - 2.0).abs());
        assert!((r - exact).abs() <= 1e-9 * exact, "ω = {w}: {r} vs {exact}");
    }
}

#[test]
fn fit_of_harmonic_table_is_polynomial_one() {
    let tmp = TempDir::new().unwrap();
    let mut table = String::from("t,value\n");
    for i in 1..=100 {
        let t = i as f64 * 0.5;
        table.push_str(&format!("{t},{}\n", 1.0 / t));
    }
    write(tmp.path(), "table.csv", &table);
    let out = passreg(&["fit", "--input", "table.csv", "--out", "f"], tmp.path());
    assert!(out.status.success());
    let m: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("f/fit.json")).unwrap()).unwrap();
    assert_eq!(m["kind"], "Polynomial");
    assert!((m["alpha"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn config_errors_are_reported() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "cfg.json", r#"{"example": "heat-2d", "signal": {"file": "missing.json"}}"#);
    let out = passreg(&["verify", "--config", "cfg.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
    let out = passreg(&["verify", "--config", "nope.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}
