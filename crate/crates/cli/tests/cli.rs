use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critbif")).args(args).current_dir(dir).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn bifpoints_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bifpoints", "--family", "gp", "--dim", "3", "--n", "0..4", "--no-meta"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let rows = v["payload"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!((rows[2]["alpha_star"].as_f64().unwrap() - 19.0 / 9.0).abs() < 1e-14);
    for fam in [&["--family", "gp"][..], &["--family", "dh"], &["--family", "schrodinger", "--p", "0.5"]] {
        let mut args = vec!["bifpoints", "--dim", "4", "--n", "1", "--no-meta"];
        args.extend_from_slice(fam);
        let v = json(&run(&args, dir.path()));
        assert!((v["payload"]["rows"][0]["alpha_star"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    }
    assert_eq!(run(&["bifpoints", "--family", "gp", "--dim", "3", "--n", "4..2"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["bifpoints", "--family", "xx", "--dim", "3", "--n", "1"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["bifpoints", "--dim", "3"], dir.path()).status.code(), Some(2));
}

#[test]
fn table_against_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["table", "--golden", "--no-meta"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["payload"]["golden"]["compared"], 18);
    let counts = &v["payload"]["table"]["counts"];
    // rows follow n = 2..7, columns N = 3, 4, 5
    assert_eq!(counts[4][1], 4);
    assert_eq!(counts[4][0], 3);
    let beyond = run(&["table", "--dims", "6", "--n", "2..3", "--golden", "--no-meta"], dir.path());
    assert_eq!(beyond.status.code(), Some(0));
    assert_eq!(json(&beyond)["payload"]["golden"]["compared"], 0);
    assert_eq!(run(&["table", "--n", "1..3"], dir.path()).status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--dim", "3", "--n-max", "4", "--no-meta"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let checks = v["payload"]["checks"].as_array().unwrap();
    let analytic = checks.iter().find(|c| c["name"] == "analytic_residual").unwrap();
    assert!(analytic["value"].as_f64().unwrap() <= 1e-9);
    let out = run(&["verify", "--dim", "4", "--n-max", "8", "--no-meta"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let eig = v["payload"]["checks"].as_array().unwrap().iter().find(|c| c["name"] == "discrete_eigenvalues").unwrap().clone();
    assert!(eig["value"].as_f64().unwrap() <= 1e-6);
    assert_eq!(run(&["verify", "--dim", "2"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["verify", "--dim", "3", "--n-max", "9"], dir.path()).status.code(), Some(2));
    // Gauss quadrature on each angular weight is exact, so the smallest grid suffices.
    assert_eq!(run(&["verify", "--dim", "3", "--grid", "16"], dir.path()).status.code(), Some(0));
    assert_eq!(run(&["verify", "--dim", "3", "--grid", "15"], dir.path()).status.code(), Some(2));
}

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "alpha,eps,residual,min_margin,z1_remainder,z2_remainder");
    lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn continue_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["continue", "--family", "gp", "--dim", "3", "--n", "2", "--out", "branch.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_csv(&std::fs::read_to_string(dir.path().join("branch.csv")).unwrap());
    assert_eq!(rows.len(), 41);
    let trivial = rows.iter().filter(|r| r[1] == 0.0).count();
    assert_eq!(trivial, 1);
    assert!(rows.iter().all(|r| r[2] <= 1e-9 && r[3] > 0.0));
    // Rows are sorted by ε, so the k-th from each end match.
    for i in 0..20 {
        assert!((rows[i][1] + rows[40 - i][1]).abs() < 1e-8);
    }
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("branch.json")).unwrap()).unwrap();
    let alpha = side["payload"]["detection"]["alpha"].as_f64().unwrap();
    assert!((alpha - 19.0 / 9.0).abs() <= 1e-6);
    assert_eq!(side["config"]["options"]["steps"], 20);
}

#[test]
fn continue_failure_keeps_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    // No step can meet this tolerance, so the arms stop after ten halvings.
    let out = run(
        &["continue", "--family", "dh", "--dim", "4", "--n", "1", "--tol", "1e-30", "--steps", "3", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let side: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert!(side["payload"]["error"].is_string());
    assert!(dir.path().join("b.csv").exists());
    let out = run(&["continue", "--family", "gp", "--dim", "3", "--n", "2", "--detect-grid", "8", "--out", "c.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_and_harmonics() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&run(&["kernel", "--dim", "4", "--n", "3", "--no-meta"], dir.path()));
    assert_eq!(v["payload"]["dim"], 4);
    assert!(!v["payload"]["classes"].as_array().unwrap().is_empty());
    let v = json(&run(&["harmonics-dim", "--dim", "5", "--m", "2", "--k", "6", "--oracle", "--no-meta"], dir.path()));
    assert_eq!(v["payload"]["closed_form"], 3);
    assert_eq!(v["payload"]["oracle"], 3);
    let out = run(&["harmonics-dim", "--dim", "4", "--m", "2", "--k", "13", "--oracle"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "family = \"dh\"\ndim = 5\nn = \"0..2\"\nno-meta = true\n").unwrap();
    let v = json(&run(&["bifpoints", "--config", "run.toml"], dir.path()));
    assert_eq!(v["config"]["dim"], 5);
    assert!(v.get("timestamp").is_none());
    let v = json(&run(&["bifpoints", "--config", "run.toml", "--dim", "3"], dir.path()));
    assert_eq!(v["config"]["dim"], 3);
    assert_eq!(v["config"]["family"]["name"], "dh");
    std::fs::write(dir.path().join("bad.toml"), "colour = 3\n").unwrap();
    assert_eq!(run(&["bifpoints", "--config", "bad.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn deterministic_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["kernel", "--dim", "5", "--n", "4", "--no-meta", "--out", "a.json"], dir.path());
    let b = run(&["kernel", "--dim", "5", "--n", "4", "--no-meta", "--sequential", "--out", "b.json"], dir.path());
    assert!(a.status.success() && b.status.success());
    let (ta, tb) = (
        std::fs::read(dir.path().join("a.json")).unwrap(),
        std::fs::read(dir.path().join("b.json")).unwrap(),
    );
    assert_eq!(ta, tb);
    let v: Value = serde_json::from_slice(&ta).unwrap();
    let report: critbif::symmetry::KernelReport = serde_json::from_value(v["payload"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&report).unwrap(), v["payload"]);
    let with_meta = json(&run(&["table"], dir.path()));
    assert!(with_meta["timestamp"].is_u64());
}
