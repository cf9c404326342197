use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SECURE_PLAN: &str = "year,corridor,from,to,class,added
1,1,1,2,a,1
1,9,2,6,a,3
1,10,3,4,a,1
1,11,3,5,a,4
1,14,4,6,a,2
2,6,2,3,a,3
2,14,4,6,a,1
3,1,1,2,a,1
";

const BASE_PLAN: &str = "year,corridor,from,to,class,added
1,4,1,5,a,1
1,6,2,3,a,1
1,9,2,6,a,2
1,11,3,5,a,2
1,14,4,6,a,2
3,9,2,6,a,1
3,11,3,5,a,1
";

fn gridplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridplan"))
        .args(args)
        .env("GRIDPLAN_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn without_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn zero_trials_is_a_usage_error() {
    let out = gridplan(&["solve", "--case", "garver6", "--mode", "four-stage", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}

#[test]
fn unknown_flag_and_bad_param_are_usage_errors() {
    assert_eq!(gridplan(&["solve", "--case", "garver6", "--bogus"]).status.code(), Some(1));
    assert_eq!(gridplan(&["solve", "--case", "garver6", "--param", "e_h"]).status.code(), Some(1));
    assert_eq!(gridplan(&["solve", "--case", "garver6", "--param", "nope=3"]).status.code(), Some(1));
    assert_eq!(gridplan(&["solve", "--case", "no-such-case.json"]).status.code(), Some(1));
    assert_eq!(gridplan(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_accepts_secure_plan_and_rejects_base_plan() {
    let dir = tempfile::tempdir().unwrap();
    let secure = dir.path().join("secure.csv");
    let base = dir.path().join("base.csv");
    std::fs::write(&secure, SECURE_PLAN).unwrap();
    std::fs::write(&base, BASE_PLAN).unwrap();
    let out_dir = dir.path().join("v");
    let out = out_dir.to_str().unwrap();
    let ok = gridplan(&["verify", "--case", "garver6", "--plan", secure.to_str().unwrap(), "--out", out]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let r = report(&out_dir);
    assert_eq!(r["result"]["secure"], Value::Bool(true));
    assert!((r["result"]["plan_cost"].as_f64().unwrap() - 413.73).abs() < 1e-6);
    let bad = gridplan(&["verify", "--case", "garver6", "--plan", base.to_str().unwrap(), "--out", out]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn screen_lists_violated_corridors() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.csv");
    std::fs::write(&base, BASE_PLAN).unwrap();
    let out = gridplan(&["screen", "--case", "garver6", "--plan", base.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    let viol = r["result"]["pc_viol"].as_array().unwrap();
    assert!(!viol.is_empty());
    assert_eq!(viol.len(), r["result"]["pc_viol_labels"].as_array().unwrap().len());
}

#[test]
fn planning_run_writes_files_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |o: &Path| {
        vec![
            "solve".to_string(),
            "--case".into(),
            "garver6".into(),
            "--mode".into(),
            "stage1".into(),
            "--seed".into(),
            "7".into(),
            "--trials".into(),
            "3".into(),
            "--out".into(),
            o.to_str().unwrap().into(),
        ]
    };
    let run = |o: &Path| {
        let owned = args(o);
        let refs: Vec<&str> = owned.iter().map(String::as_str).collect();
        gridplan(&refs)
    };
    let first = run(&a);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    run(&b);
    for f in ["plan.csv", "convergence.csv", "report.json"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    let plan = std::fs::read_to_string(a.join("plan.csv")).unwrap();
    assert!(plan.starts_with("year,corridor,from,to,class,added\n"));
    assert!(plan.lines().count() > 1);
    let ra = report(&a);
    assert_eq!(ra["config"]["seed"], 7);
    assert_eq!(ra["config"]["mode"], "stage1");
    assert_eq!(ra["result"]["trials"].as_array().unwrap().len(), 3);
    // identical apart from wall-clock data and the output directory
    let mut ra = without_timestamp(ra);
    let mut rb = without_timestamp(report(&b));
    ra["config"]["out"] = Value::Null;
    rb["config"]["out"] = Value::Null;
    assert_eq!(ra, rb);
}

#[test]
fn tune_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridplan(&[
        "tune",
        "--case",
        "garver6",
        "--grid",
        "e_h=1,2",
        "--trials",
        "2",
        "--param",
        "iter=3",
        "--param",
        "cs_n=4",
        "--param",
        "sequential_compensation=false",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("tuning.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "e_h,variance_trial_1,variance_trial_2,min_cost,max_cost,mean_cost,stddev_cost"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn tune_without_grid_is_usage_error() {
    assert_eq!(gridplan(&["tune", "--case", "garver6"]).status.code(), Some(1));
}
