//! End-to-end runs of the `monodual` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_monodual"));
    c.env_remove("MONODUAL_OUTPUT_DIR");
    c
}

fn small_config(out: &Path) -> Value {
    json!({
        "domain": { "n": [2, 3] },
        "grid": { "cells": [8, 10] },
        "nonlinearity": { "type": "power", "p": 4.0 },
        "weight_a": { "type": "radial_power", "alpha": 2.0, "offset": 1.0 },
        "output": { "dir": out }
    })
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_reports_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "c.json", &small_config(&out));
    let o = run(bin().arg("solve").arg(&cfg));
    assert_eq!(o.status.code(), Some(0));
    for f in [
        "solution.csv",
        "residual_history.csv",
        "energy_history.csv",
        "slice_axis1.csv",
        "slice_axis2.csv",
        "report.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let rep = read_json(&out.join("report.json"));
    assert_eq!(rep["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rep["config"]["grid"]["cells"], json!([8, 10]));
    assert_eq!(rep["config"]["solver"]["method"], "fixed_point");
    assert_eq!(rep["report"]["converged"], true);
    assert!(rep["energy"]["I"].is_number());
    let rows = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 80 + 1);
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut v = small_config(&out);
    v["solver"] = json!({ "method": "mountain_pass", "seed": 5 });
    let cfg = write_config(tmp.path(), "c.json", &v);
    let snapshot = || -> Vec<(String, Vec<u8>)> {
        assert_eq!(run(bin().arg("solve").arg(&cfg)).status.code(), Some(0));
        let mut files: Vec<_> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let first = snapshot();
    assert!(first.len() >= 4);
    assert_eq!(first, snapshot());
}

#[test]
fn overrides_and_env_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &small_config(&tmp.path().join("unused")),
    );
    let env_dir = tmp.path().join("from_env");
    let o = run(bin()
        .arg("solve")
        .arg(&cfg)
        .args([
            "--set",
            "solver.tol_residual=1e-9",
            "--set",
            "output.formats=[\"json\"]",
        ])
        .env("MONODUAL_OUTPUT_DIR", &env_dir));
    assert_eq!(o.status.code(), Some(0));
    assert!(!tmp.path().join("unused").exists());
    assert!(!env_dir.join("solution.csv").exists());
    let rep = read_json(&env_dir.join("report.json"));
    assert_eq!(rep["config"]["solver"]["tol_residual"], 1e-9);
    assert_eq!(rep["config"]["output"]["dir"], json!(env_dir));
    assert!(rep["report"]["strong_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn sweep_runs_each_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let entries: Vec<Value> = [3.0, 5.0]
        .iter()
        .map(|p| {
            let mut v = small_config(&out);
            v["nonlinearity"]["p"] = json!(p);
            v
        })
        .collect();
    let cfg = write_config(tmp.path(), "s.json", &Value::Array(entries));
    assert_eq!(run(bin().arg("solve").arg(&cfg)).status.code(), Some(0));
    for (i, p) in [3.0, 5.0].iter().enumerate() {
        let rep = read_json(&out.join(format!("run_{i:03}")).join("report.json"));
        assert_eq!(rep["config"]["nonlinearity"]["p"], json!(p));
    }
}

#[test]
fn bad_input_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(
        run(bin().args(["solve", "/nonexistent/c.json"]))
            .status
            .code(),
        Some(2)
    );

    let mut v = small_config(&out);
    v["grid"]["cells"] = json!([8]);
    let cfg = write_config(tmp.path(), "bad.json", &v);
    assert_eq!(run(bin().arg("solve").arg(&cfg)).status.code(), Some(2));

    let mut v = small_config(&out);
    v["solver"] = json!({ "bogus": 1 });
    let cfg = write_config(tmp.path(), "bad2.json", &v);
    assert_eq!(run(bin().arg("solve").arg(&cfg)).status.code(), Some(2));

    let cfg = write_config(tmp.path(), "ok.json", &small_config(&out));
    let o = run(bin()
        .arg("solve")
        .arg(&cfg)
        .args(["--set", "nonlinearity.p=1.5"]));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(2));
}

#[test]
fn unmet_contract_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "c.json", &small_config(&out));
    let o = run(bin()
        .arg("solve")
        .arg(&cfg)
        .args(["--set", "solver.max_outer=1"]));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(
        read_json(&out.join("report.json"))["report"]["converged"],
        false
    );
}

#[test]
fn auxiliary_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut v = small_config(&out);
    v["grid"]["cells"] = json!([8, 8]);
    let cfg = write_config(tmp.path(), "c.json", &v);

    let o = run(bin().arg("conjugate").arg(&cfg).args(["--samples", "11"]));
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("conjugate.csv")).unwrap();
    assert!(csv.starts_with("x,F,f,Fstar,dFstar\n"));
    assert_eq!(csv.lines().count(), 12);
    // Power(4): F*(s) = 3/4 s^{4/3}; row 3 is s = 2.
    let row: Vec<f64> = csv
        .lines()
        .nth(3)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((row[3] - 0.75 * 2f64.powf(4.0 / 3.0)).abs() < 1e-12);

    assert_eq!(
        run(bin().arg("embed-check").arg(&cfg).args(["--samples", "5"]))
            .status
            .code(),
        Some(0)
    );
    let e = read_json(&out.join("embed_check.json"));
    assert_eq!(e["passed"], true);
    assert!(e["config"].is_object());

    assert_eq!(run(bin().arg("verify").arg(&cfg)).status.code(), Some(0));
    let r = read_json(&out.join("verify.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));

    let o = run(bin().args(["manufactured", "--n", "2", "--cells", "32,64,128"]));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 3);
}

#[test]
fn tabulated_config_resolves_table_next_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let table: String = (0..=200)
        .map(|i| {
            let t = i as f64 * 0.05;
            format!("{t},{}\n", t * t * t)
        })
        .collect();
    fs::write(tmp.path().join("t.csv"), format!("t,f\n{table}")).unwrap();
    let mut v = small_config(&out);
    v["nonlinearity"] = json!({ "type": "tabulated", "table_path": "t.csv", "p": 4.0, "mu": 4.0, "ell": 1.26, "growth_c": 1.0 });
    v["solver"] = json!({ "method": "mountain_pass", "tol_residual": 1e-6 });
    let cfg = write_config(tmp.path(), "c.json", &v);
    assert_eq!(run(bin().arg("solve").arg(&cfg)).status.code(), Some(0));
    assert_eq!(
        read_json(&out.join("report.json"))["report"]["method"],
        "mountain_pass"
    );
}
