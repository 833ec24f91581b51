use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

const SELLER_BUYER: &str = include_str!("../../mechlab/scenarios/seller_buyer_T2.json");

fn mechlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechlab")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_scenario(dir: &Path, edit: impl FnOnce(&mut Value)) -> String {
    let mut value: Value = serde_json::from_str(SELLER_BUYER).unwrap();
    edit(&mut value);
    let path = dir.join("scenario.json");
    fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn solve_on_the_bundled_scenario_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mechlab(&["solve", "--scenario", "seller_buyer_T2.json", "--grid", "201", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_dir.join("run_report.json"));
    assert_eq!(report["command"], "solve");
    assert!(report["modules"]["solve"]["bottom_value"].as_f64().unwrap().abs() < 1e-3);
    assert!(out_dir.join("values_t1.csv").exists() && out_dir.join("values_t2.csv").exists());
}

#[test]
fn broken_support_exits_with_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = mechlab(&["validate", "--scenario", "broken_support.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("support error"));
}

#[test]
fn missing_terminal_payments_exit_with_ic_failure() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), |v| {
        let zero = json!({ "kind": "poly", "terms": [] });
        v["mechanism"]["payments"] =
            json!({ "continuing": [zero, zero], "terminal": [zero, zero], "posted": ["0", "0"] });
    });
    let out_dir = dir.path().join("out");
    let out = mechlab(&["verify-ic", "--scenario", &scenario, "--grid", "41", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(read_json(&out_dir.join("ic_report.json"))["verdict"], false);
}

#[test]
fn configuration_errors_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&mechlab(&["solve", "--scenario", "no_such_file.json", "--out", d])), 4);
    assert_eq!(code(&mechlab(&["solve"])), 4);
    assert_eq!(code(&mechlab(&["frobnicate"])), 4);
    assert_eq!(code(&mechlab(&["solve", "--scenario", "seller_buyer_T2.json", "--eta", "x", "--out", d])), 4);
    let typo = write_scenario(dir.path(), |v| v["solver"]["tolerence"] = json!(1));
    assert_eq!(code(&mechlab(&["solve", "--scenario", &typo, "--out", d])), 4);
}

#[test]
fn help_exits_cleanly() {
    let out = mechlab(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("verify-ic"));
}

#[test]
fn json_format_and_repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = mechlab(&[
            "report",
            "--scenario",
            "seller_buyer_T2.json",
            "--grid",
            "31",
            "--format",
            "json",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "values_t1.json"));
    assert!(names.iter().any(|n| n == "plot_gap_t2.json"));
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn optimize_sweeps_thresholds_and_keeps_the_best() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("opt");
    let out = mechlab(&[
        "optimize",
        "--scenario",
        "seller_buyer_T2.json",
        "--grid",
        "21",
        "--eta",
        "0;1",
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_dir.join("optimizer_report.json"));
    let sweep = &report["sweep"];
    assert_eq!(sweep["points"].as_array().unwrap().len(), 2);
    assert_eq!(sweep["best"], 0);
    assert!(out_dir.join("optimizer_comparison.csv").exists());
}

#[test]
fn simulate_writes_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("mc");
    let scenario = write_scenario(dir.path(), |v| v["simulation"]["paths"] = json!(2000));
    let out = mechlab(&["simulate", "--scenario", &scenario, "--grid", "51", "--seed", "8", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stats = read_json(&out_dir.join("mc_stats.json"));
    assert_eq!(stats["stats"]["paths"], 2000);
    assert_eq!(stats["stats"]["seed"], 8);
    assert!(stats["agent_z"].as_f64().unwrap().abs() < 4.0);
}
