use std::collections::HashMap;
use std::process::{Command, Output};

use eldp::model::{bundled, total_cost, DispatchVector};

fn eldp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eldp")).args(args).env_remove("ELDP_THREADS").output().unwrap()
}

fn record(out: &Output) -> HashMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

#[test]
fn machine_record_round_trips_cost() {
    for (case, method) in [("case1", "simple"), ("case2b", "adaptive"), ("case3", "tangent")] {
        let out = eldp(&["solve", "--method", method, "--format", "machine", case]);
        assert_eq!(out.status.code(), Some(0));
        let rec = record(&out);
        let n: usize = rec["units"].parse().unwrap();
        let p: Vec<f64> = (1..=n).map(|i| rec[&format!("p{i}")].parse().unwrap()).collect();
        let printed: f64 = rec["total_cost"].parse().unwrap();
        let problem = bundled(case).unwrap();
        let cost = total_cost(&problem, &DispatchVector(p)).unwrap();
        assert!((cost - printed).abs() <= 0.01, "{case}: {cost} vs {printed}");
        assert!(!rec.contains_key("wall_time"));
    }
}

#[test]
fn timing_is_opt_in() {
    let rec = record(&eldp(&["solve", "--format", "machine", "--timing", "case1"]));
    assert!(rec.contains_key("wall_time") && rec.contains_key("cpu_time"));
}

#[test]
fn exit_status_reflects_certification() {
    assert_eq!(eldp(&["solve", "case1"]).status.code(), Some(0));
    assert_eq!(eldp(&["solve", "--node-cap", "1", "case2a"]).status.code(), Some(1));
    assert_eq!(eldp(&["solve", "--method", "adaptive", "--max-iterations", "1", "case1"]).status.code(), Some(1));
    let bad = eldp(&["solve", "--method", "quadratic", "case1"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());
}

#[test]
fn dataset_files_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.txt");
    std::fs::write(&path, "demand 300\n0.002 8 100 50 0.05 50 250\n0.003 7 120 40 0.06 40 200\n").unwrap();
    let out = eldp(&["solve", "--format", "machine", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rec = record(&out);
    assert_eq!(rec["case"], "two");
    assert_eq!(rec["total_power"].parse::<f64>().unwrap(), 300.0);

    std::fs::write(&path, "demand 300\n0.002 8 100 50\n").unwrap();
    let out = eldp(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn export_and_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("case3.lp");
    let out = eldp(&[
        "export",
        "--method",
        "tangent",
        "--theta1",
        "0.35pi",
        "--theta2",
        "0.47pi",
        "-o",
        lp.to_str().unwrap(),
        "case3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Subject To") && text.contains("eta40_3"));

    let trace = dir.path().join("trace.txt");
    let out = eldp(&["solve", "--method", "adaptive", "--trace", trace.to_str().unwrap(), "case1"]);
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(&trace).unwrap();
    assert!(table.starts_with("iter"));
    assert!(table.lines().count() >= 3);

    let out = eldp(&["solve", "--trace", trace.to_str().unwrap(), "case1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_comes_from_environment() {
    let base = record(&eldp(&["solve", "--format", "machine", "case2a"]));
    let out = Command::new(env!("CARGO_BIN_EXE_eldp"))
        .args(["solve", "--parallel", "--format", "machine", "case2a"])
        .env("ELDP_THREADS", "2")
        .output()
        .unwrap();
    let par = record(&out);
    assert_eq!(base["total_cost"], par["total_cost"]);
    assert_eq!(base["certified_bound"], par["certified_bound"]);
    let out = Command::new(env!("CARGO_BIN_EXE_eldp"))
        .args(["solve", "--parallel", "case1"])
        .env("ELDP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_passes() {
    let out = eldp(&["bench"]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{table}");
    assert_eq!(table.lines().count(), 10);
    assert!(table.lines().any(|l| l.starts_with("case2b  simple") && l.contains("+0.74")));
}
