use std::process::{Command, Output};

use serde_json::Value;

fn anticomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anticomm")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(anticomm(&["--help"]).status.code(), Some(0));
    let v = anticomm(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(anticomm::VERSION));
}

#[test]
fn usage_and_precondition_errors_exit_two() {
    assert_eq!(anticomm(&["bogus"]).status.code(), Some(2));
    assert_eq!(anticomm(&["verify", "--N", "8", "--theta", "0.5"]).status.code(), Some(2));
    assert_eq!(anticomm(&["verify", "--N", "8", "--tau", "4"]).status.code(), Some(2));
    assert_eq!(anticomm(&["law", "--z-grid=0:1:3,-1:1:3"]).status.code(), Some(2));
    let out = anticomm(&["sample", "--N", "4", "--ensemble", "cauchy"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cauchy"));
}

#[test]
fn verify_envelope() {
    let out = anticomm(&["verify", "--N", "16", "--seed", "2", "--c", "1", "--z-grid=-1:1:3,0.5:2:2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["tool"], "anticomm");
    assert_eq!(v["version"], anticomm::VERSION);
    assert_eq!(v["passed"], true);
    assert_eq!(v["command"]["verify"]["pair"]["seed"], 2);
    let r = &v["report"];
    assert_eq!(r["n"], 16);
    assert_eq!(r["grid"].as_array().unwrap().len(), 6);
    assert!(r["k"].as_f64().unwrap() >= 2.0);
    assert!(r["empirical_theta_star"].as_f64().is_some());
}

#[test]
fn pair_file_reproduces_sampled_pair() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.txt");
    let p = path.to_str().unwrap();
    assert_eq!(anticomm(&["sample", "--N", "10", "--seed", "9", "--out", p]).status.code(), Some(0));
    let a = json(&anticomm(&["linearize-check", "--N", "10", "--seed", "9"]));
    let b = json(&anticomm(&["linearize-check", "--pair", p]));
    assert_eq!(a["report"], b["report"]);
}

#[test]
fn out_file_replaces_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig1.csv");
    let out = anticomm(&["figure1", "--rho", "0.02", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rho,lambda,sigma"));
    assert_eq!(lines.count(), 1603);
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_anticomm"))
            .args(["verify", "--N", "12", "--c", "1", "--z-grid=-2:2:5,0.2:1:2"])
            .env("ANTICOMM_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn law_rows_match_library() {
    let out = anticomm(&["law", "--z-grid=0.5:0.5:1,0.25:0.25:1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    let m = anticomm::freelaw::m_at(anticomm::linalg::c(0.5, 0.25)).unwrap();
    assert_eq!((row[2], row[3]), (m.re, m.im));
}

#[test]
fn deloc_reports_bulk_rows() {
    let out = anticomm(&["deloc", "--N", "96", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["report"]["bulk_count"].as_u64().unwrap() > 0);
    assert_eq!(v["report"]["bulk_all_hold"], true);
}
