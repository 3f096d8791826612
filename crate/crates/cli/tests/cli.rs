use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const EXAMPLES: [&str; 6] = [
    "burgers_admissible",
    "linear2_wrong_viscosity",
    "cubic_admissible",
    "elastodynamics_curve",
    "euler_regions",
    "lagrangian_layer",
];

fn bdlayer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdlayer")).args(args).output().expect("spawn bdlayer")
}

fn run_example(name: &str, out: &Path) -> Output {
    bdlayer(&["run", "--example", name, "--out", out.to_str().unwrap()])
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn catalog_lists_the_examples() {
    let o = bdlayer(&["list-examples"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() >= 6);
    for name in EXAMPLES {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
    let shown = bdlayer(&["list-examples", "--show", "euler_regions"]);
    let cfg: Value = serde_json::from_slice(&shown.stdout).unwrap();
    assert_eq!(cfg["name"], "euler_regions");
}

#[test]
fn every_example_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for name in EXAMPLES {
        let out = tmp.path().join(name);
        let o = run_example(name, &out);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let summary = read_json(&out.join(format!("{name}.run.json")));
        for task in summary["tasks"].as_array().unwrap() {
            for a in task["artifacts"].as_array().unwrap() {
                assert!(out.join(a.as_str().unwrap()).is_file());
            }
        }
        // No temporary files are left behind.
        assert!(fs::read_dir(&out).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
    }
}

fn in_burgers_set(u0: f64) -> bool {
    u0 <= -1.0 + 1e-9 || (u0 - 1.0).abs() < 1e-9
}

#[test]
fn burgers_sets_match_the_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bdlayer(&["admissible", "--example", "burgers_admissible", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let report = read_json(&tmp.path().join("sets.admissible.json"));
    let set = &report["riemann_set"];
    assert_eq!(set["points"], serde_json::json!([1.0]));
    assert_eq!(set["intervals"][0]["lo"], "-inf");
    assert_eq!(set["intervals"][0]["hi"], -1.0);
    assert_eq!(set["intervals"][0]["hi_closed"], true);
    assert_eq!(report["layer_set"]["intervals"][0]["hi_closed"], false);
    assert_eq!(report["excluded_points"], serde_json::json!([-1.0]));
    assert_eq!(report["audit"]["samples"], 1000);
    assert_eq!(report["audit"]["violations"].as_array().unwrap().len(), 0);

    let mut rdr = csv::Reader::from_path(tmp.path().join("sets.membership.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let u0: f64 = rec[0].parse().unwrap();
        let expect = in_burgers_set(u0);
        let flags: Vec<bool> = (1..5).map(|i| &rec[i] == "1").collect();
        assert_eq!(flags[..3], [expect; 3], "u0 = {u0}");
        let layer_expect = expect && (u0 + 1.0).abs() > 1e-9;
        assert_eq!(flags[3], layer_expect, "layer at u0 = {u0}");
        rows += 1;
    }
    assert_eq!(rows, 601);
}

#[test]
fn wrong_viscosity_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bdlayer(&["layer", "--example", "linear2_wrong_viscosity", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    let m = &read_json(&tmp.path().join("diag51.layer.json"))["manifold"];
    assert_eq!(m["mismatch"], true);
    assert_eq!(m["stable_dim"], 0);
    assert_eq!(m["p"], 1);
}

#[test]
fn outputs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["burgers_admissible", "lagrangian_layer"] {
        let (a, b) = (tmp.path().join(format!("{name}_a")), tmp.path().join(format!("{name}_b")));
        assert!(run_example(name, &a).status.success());
        assert!(run_example(name, &b).status.success());
        let mut files: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        assert!(files.len() > 3);
        for f in files {
            assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f:?}");
        }
    }
}

#[test]
fn seed_is_recorded_and_overridable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = bdlayer(&["admissible", "--example", "cubic_admissible", "--out", out, "--seed", "11", "--jobs", "1"]);
    assert!(o.status.success());
    let report = read_json(&tmp.path().join("sets.admissible.json"));
    assert_eq!(report["seed"], 11);
    assert_eq!(report["audit"]["seed"], 11);
    assert_eq!(read_json(&tmp.path().join("cubic_admissible.run.json"))["seed"], 11);
}

#[test]
fn empty_task_list_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"name": "e", "model": {"name": "burgers"}, "tasks": []}"#);
    let o = bdlayer(&["run", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tasks"));
}

#[test]
fn schema_problems_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    for text in [
        r#"{"name": "e", "model": {"name": "burgers"}, "tasks": [{"task": "verify", "id": "v"}], "extra": 1}"#,
        r#"{"name": "e", "model": {"name": "nope"}, "tasks": [{"task": "verify", "id": "v"}]}"#,
        r#"{"name": "e", "model": {"name": "burgers"}, "tasks": [{"task": "simulate", "id": "s"}]}"#,
        r#"{"name": "e", "model": {"name": "burgers"}, "scheme": {"type": "lax_friedrichs", "lambda": 2.0, "q": 0.5},
            "grid": {"x_max": 1.0, "cells": 10, "t_end": 1.0}, "data": {"u_initial": 1.0, "u_boundary": 1.0},
            "tasks": [{"task": "simulate", "id": "s"}]}"#,
    ] {
        let cfg = write_config(tmp.path(), text);
        let o = bdlayer(&["run", "--config", &cfg, "--out", out]);
        assert_eq!(o.status.code(), Some(2), "{text}\n{}", String::from_utf8_lossy(&o.stderr));
    }
    // A subcommand with no matching task.
    let o = bdlayer(&["study", "--example", "euler_regions", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"name": "bad", "model": {"name": "elastodynamics"},
            "tasks": [{"task": "layer", "id": "l", "u_b": [2.0, 0.0], "v_inf": [-1.0, 0.0],
                       "regularization": {"type": "viscous"}}]}"#,
    );
    let out = tmp.path().join("out");
    let o = bdlayer(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let err = read_json(&out.join("error.json"));
    assert_eq!(err["task"], "l");
    assert!(err["message"].as_str().unwrap().len() > 5);
}

#[test]
fn standalone_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bdlayer(&["verify", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(&tmp.path().join("verify.json"));
    assert_eq!(report["passed"], true);
    assert!(!String::from_utf8(o.stdout).unwrap().contains("FAIL"));
}
