//! End-to-end runs of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

use nfvslice::solution::SlicePlan;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfvslice"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["fig1", "--out-dir", "."]);
    assert!(out.status.success());
    dir
}

#[test]
fn solve_fig1_full() {
    let dir = fixtures();
    let out = run(dir.path(), &["solve", "fig1.json", "--variant", "full", "--paths", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let plan = SlicePlan::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(plan.activated.len(), 2);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("status=optimal objective=2"));
    assert!(!stderr.contains("FAIL"));
}

#[test]
fn single_path_rate4_is_infeasible() {
    let dir = fixtures();
    let out = run(dir.path(), &["solve", "fig1-rate4.json", "--variant", "single-path"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn node_budget_exhaustion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(
        dir.path(),
        &["generate", "--seed", "3", "--services", "2", "-o", "inst.json"],
    );
    assert!(gen.status.success());
    let out = run(
        dir.path(),
        &["solve", "inst.json", "--node-limit", "1", "--time-limit", "0"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn tampered_plan_validates_with_failures() {
    let dir = fixtures();
    let out = run(
        dir.path(),
        &["solve", "fig1.json", "-o", "plan.json", "--report", "report.json"],
    );
    assert_eq!(out.status.code(), Some(0));
    let mut plan = SlicePlan::from_json(&std::fs::read_to_string(dir.path().join("plan.json")).unwrap()).unwrap();
    plan.services[0].segments[0].paths[0].rate += 1.0;
    std::fs::write(dir.path().join("bad.json"), plan.to_json()).unwrap();
    let out = run(dir.path(), &["validate", "fig1.json", "bad.json"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL"));
    let ok = run(dir.path(), &["validate", "fig1.json", "plan.json", "--json"]);
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn input_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("junk.json"), "{ not json").unwrap();
    for args in [
        &["solve", "junk.json"][..],
        &["solve", "missing.json"],
        &["solve"],
        &["frobnicate"],
        &["generate", "--nodes", "1"],
        &["solve", "junk.json", "--variant", "bogus"],
    ] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), &["generate", "--seed", "7", "--services", "3"]);
    let b = run(dir.path(), &["generate", "--seed", "7", "--services", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(dir.path(), &["generate", "--seed", "8", "--services", "3"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn experiment_writes_reproducible_reports() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "experiment",
        "feasibility",
        "--services",
        "1,2",
        "--instances",
        "2",
        "--node-limit",
        "500",
        "--time-limit",
        "0",
        "--workers",
        "2",
    ];
    let mut a: Vec<&str> = args.to_vec();
    a.extend(["--out-dir", "a"]);
    let mut b: Vec<&str> = args.to_vec();
    b.extend(["--out-dir", "b"]);
    assert_eq!(run(dir.path(), &a).status.code(), Some(0));
    assert_eq!(run(dir.path(), &b).status.code(), Some(0));
    for f in ["feasibility.json", "feasibility_rows.csv", "feasibility_points.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let rows = std::fs::read_to_string(dir.path().join("a/feasibility_rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 3);
}

#[test]
fn experiment_help_documents_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["experiment", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8(out.stdout).unwrap();
    assert!(help.contains(nfvslice::harness::ROWS_CSV_HEADER));
    assert!(help.contains(nfvslice::harness::POINTS_CSV_HEADER));
}

#[test]
fn lp_export_and_trace() {
    let dir = fixtures();
    let out = run(
        dir.path(),
        &[
            "solve",
            "fig1.json",
            "--lp",
            "fig1.lp",
            "--trace",
            "trace.txt",
            "-o",
            "plan.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let lp = std::fs::read_to_string(dir.path().join("fig1.lp")).unwrap();
    let parsed = nfvslice::lp_format::read_lp(&lp).unwrap();
    assert!(parsed.column("Y(E)").is_some());
    let trace = std::fs::read_to_string(dir.path().join("trace.txt")).unwrap();
    assert!(trace.lines().next().unwrap().starts_with("node=0 depth=0"));
}
