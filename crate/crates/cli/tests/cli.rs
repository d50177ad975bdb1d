use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn verify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verify")).args(args).output().expect("spawn verify")
}

fn lines(out: &[u8]) -> Vec<Value> {
    String::from_utf8_lossy(out)
        .lines()
        .map(|l| serde_json::from_str(l).expect("json line"))
        .collect()
}

fn without_timing(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.contains("elapsed_seconds")).map(String::from).collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn passing_run_ends_with_summary() {
    let out = verify(&["eq1", "--n", "3", "--count", "20", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = lines(&out.stdout);
    assert_eq!(recs.len(), 21);
    let summary = &recs.last().unwrap()["summary"];
    assert_eq!(summary["total"], 20);
    assert_eq!(summary["failed"], 0);
    assert!(recs[..20].iter().all(|r| r["pass"] == true && r["check_name"] == "eq1"));
}

#[test]
fn zero_tolerance_fails_rounding_level_identities() {
    let out = verify(&["suite", "fourier", "--tol-linear", "0", "--tol-log", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let recs = lines(&out.stdout);
    assert!(recs.last().unwrap()["summary"]["failed"].as_u64().unwrap() > 0);
}

#[test]
fn invalid_config_writes_no_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.jsonl");
    let out = verify(&["suite", "boolean", "--n", "9", "--mode", "exhaustive", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n <= 3"));
    assert!(!report.exists());

    for args in [
        &["eq1", "--r", "2"][..],
        &["eq1", "--r", "1", "--s", "2"],
        &["eq1", "--eps", "1/2", "--r", "2", "--s", "1"],
        &["fdelta", "--delta", "1.5"],
        &["fdelta", "--delta", "0.5", "--grid-step", "0.1"],
        &["eq1", "--tol-log=-1"],
        &["eq1", "--jobs", "0"],
    ] {
        let out = verify(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn same_seed_same_records() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for path in [&a, &b] {
        let out = verify(&["suite", "all", "--n", "3", "--seed", "11", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(lines(&out.stdout).len(), 1);
    }
    let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(without_timing(&ta), without_timing(&tb));
    let other = verify(&["suite", "boolean", "--n", "3", "--seed", "12"]);
    assert_ne!(without_timing(&String::from_utf8_lossy(&other.stdout)), without_timing(&ta));
}

#[test]
fn full_suite_passes() {
    let out = verify(&["suite", "all", "--n", "3", "--r", "2", "--s", "1", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = lines(&out.stdout);
    let names: std::collections::BTreeSet<&str> = recs.iter().filter_map(|r| r["check_name"].as_str()).collect();
    for name in ["eq1", "eq77", "eq88", "chain_rule_x", "grid_minimum", "fourier_roundtrip"] {
        assert!(names.contains(name), "missing {name}");
    }
}

#[test]
fn table_errors_carry_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.txt", "n=2\n1 0 1\n");
    let out = verify(&["eq1", "--f", &f]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("f.txt:2:6") && err.contains("expected 4"), "{err}");

    let out = verify(&["eq1", "--f", &dir.path().join("missing.txt").display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn given_tables_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "n=2\n1 1 0 0\n");
    let b = write(dir.path(), "b.txt", "# odd parity\nn=2\n0 1 1 0\n");
    let out = verify(&["eq1", "--f", &a, "--g", &b, "--eps", "1/3"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = lines(&out.stdout);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["check_name"], "eq1");

    let out = verify(&["entropy", "--sets", &a, &b, "--per-step"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let h = write(dir.path(), "h.txt", "n=2\n0.5 2 0 1\n");
    let out = verify(&["eq1", "--f", &h]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fdelta_grid_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    let out = verify(&[
        "fdelta",
        "--delta-grid",
        "0:0.5:1",
        "--grid-step",
        "0.01",
        "--stationarity",
        "--csv",
        csv.to_str().unwrap(),
        "--csv-step",
        "0.25",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = lines(&out.stdout);
    let deltas: Vec<f64> = recs
        .iter()
        .filter(|r| r["check_name"] == "grid_minimum")
        .map(|r| r["params"]["delta"].as_f64().unwrap())
        .collect();
    assert_eq!(deltas, vec![1e-6, 0.5, 1.0]);
    assert!(!recs.iter().any(|r| r["check_name"] == "three_zeros"));

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("delta,a,b,c,d,F"));
    for row in rows {
        let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 6);
        assert!((cells[1..5].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(cells[5] >= -1e-12);
    }
}
