use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ttfeedback(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttfeedback")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("file exists")).expect("valid json")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn unknown_problem_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttfeedback(&["approximate", "--problem", "pendulum", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(code(&ttfeedback(&["approximate", "--lambda", "abc"])), 2);
    assert_eq!(code(&ttfeedback(&["frobnicate"])), 2);
}

#[test]
fn missing_ftt_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.ftt");
    let o = ttfeedback(&[
        "simulate",
        "--problem",
        "2d",
        "--ftt",
        missing.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = ttfeedback(&["approximate", "--config", "/nonexistent/run.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_ttfeedback"))
        .args(["sample-test", "--problem", "2d"])
        .env("TTFEEDBACK_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn rank_one_function_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttfeedback(&["approximate", "--problem", "function-a", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("report.json"));
    let ranks: Vec<u64> = report["ranks"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(ranks.len(), 101);
    assert!(ranks.iter().all(|&r| r == 1));
    assert!(dir.path().join("value.ftt").exists());
    assert_eq!(json(&dir.path().join("config.json"))["command"], "approximate");
}

#[test]
fn two_d_approximate_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ttfeedback(&["approximate", "--problem", "2d", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = ttfeedback(&["simulate", "--problem", "2d", "--x0", "1,-1", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.path().join("metrics.json"));
    assert!(m["err_j"].as_f64().unwrap() <= 1e-6, "{m}");
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,u1,cost\n"));
    assert!(dir.path().join("reference.csv").exists());

    let o = ttfeedback(&["simulate", "--problem", "2d", "--law", "lqr", "--out", out]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("metrics.json"))["law"], "lqr");
}

#[test]
fn simulate_rejects_mismatched_domain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&ttfeedback(&["approximate", "--problem", "2d", "--out", out])), 0);
    // Same dimension, different box.
    let o = ttfeedback(&["simulate", "--problem", "2d-constrained", "--out", out]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let o = ttfeedback(&["simulate", "--problem", "lorenz", "--out", out]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_flags_and_echo_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"problem": "cucker-smale", "params": {"na": 2}, "lambda": 0.5, "seed": 3,
            "rank": {"policy": "adaptive", "init": 2, "max_rank": 20, "svd_tol": 0.01, "enrich": 2}}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let o = ttfeedback(&["approximate", "--config", cfg.to_str().unwrap(), "--lambda", "1e-3", "--out", a.to_str().unwrap()]);
    assert!(code(&o) == 0 || code(&o) == 1, "{}", String::from_utf8_lossy(&o.stderr));
    let echo = json(&a.join("config.json"));
    assert_eq!(echo["lambda"].as_f64().unwrap(), 1e-3);
    assert_eq!(echo["seed"].as_u64().unwrap(), 3);
    assert_eq!(echo["sampler"]["kind"], "sdre");
    let report = json(&a.join("report.json"));
    let max_rank = report["max_rank"].as_u64().unwrap();
    assert!((2..=20).contains(&max_rank), "rank {max_rank}");
    assert!(report["oracle_calls"].as_u64().unwrap() > 0);
    assert!(report["residuals"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap().is_finite()));

    // Re-running from the echo reproduces the FTT byte for byte.
    let b = dir.path().join("b");
    let o = ttfeedback(&["approximate", "--config", a.join("config.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o) == 0, report["converged"].as_bool().unwrap());
    assert_eq!(std::fs::read(a.join("value.ftt")).unwrap(), std::fs::read(b.join("value.ftt")).unwrap());
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"problme": "2d"}"#).unwrap();
    assert_eq!(code(&ttfeedback(&["approximate", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn sample_test_checks_sdre_gradients() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttfeedback(&["sample-test", "--problem", "cucker-smale", "--na", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("report.json"));
    assert!(r["passed"].as_bool().unwrap());
    assert!(r["max_rel_grad_err"].as_f64().unwrap() <= 1e-4);
    let csv = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttfeedback(&["benchmark", "--suite", "everything", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn benchmark_exit_code_follows_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttfeedback(&["benchmark", "--suite", "lorenz", "--out", dir.path().to_str().unwrap()]);
    let verdict = json(&dir.path().join("lorenz_verdict.json"));
    let passed = verdict["passed"].as_bool().unwrap();
    assert_eq!(code(&o), if passed { 0 } else { 1 });
    let csv = std::fs::read_to_string(dir.path().join("lorenz.csv")).unwrap();
    assert!(csv.starts_with("law,lambda,max_rank,steps,rejected,cost,y_max\n"));
    assert_eq!(csv.lines().count(), 4);
}
