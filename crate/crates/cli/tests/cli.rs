use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dyadic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadic"))
        .args(args)
        .env_remove("LOWRANK_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v.clone()).unwrap()
}

const DIAG: &str = r#"{"B": [[1, 0], [0, 1]],
  "dyads": [{"v": [2, 0], "p": [1, 0]}, {"v": [0, 1], "p": [0, 1]}]}"#;

const GENERAL: &str = r#"{"B": [[4, 1, 0], [1, 3, 1], [0, 1, 5]],
  "dyads": [{"v": [1, 0, 2], "p": [0.5, 1, 0]}, {"v": [0, 1, 1], "p": [1, 0, -1]}]}"#;

fn assert_matrix_close(got: &[Vec<f64>], expect: &[Vec<f64>], tol: f64) {
    assert_eq!(got.len(), expect.len());
    for (g, e) in got.iter().flatten().zip(expect.iter().flatten()) {
        assert!((g - e).abs() <= tol, "{got:?} vs {expect:?}");
    }
}

#[test]
fn inverse_of_diag_example() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", DIAG);
    let out = json(&dyadic(&["inverse", p.to_str().unwrap()]));
    assert_matrix_close(
        &matrix(&out["inverse"]),
        &[vec![1.0 / 3.0, 0.0], vec![0.0, 0.5]],
        1e-15,
    );
}

#[test]
fn det_of_diag_example() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", DIAG);
    let out = json(&dyadic(&["det", p.to_str().unwrap()]));
    assert_eq!(out["det_a"], 6.0);
    assert_eq!(out["det_b"], 1.0);
    assert_eq!(out["det_b_prime"], 6.0);
}

#[test]
fn approx_order_zero_is_base_inverse() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", GENERAL);
    let out = json(&dyadic(&["approx", "--order", "0", p.to_str().unwrap()]));
    // Inverse of [[4,1,0],[1,3,1],[0,1,5]], determinant 51.
    let expect = [
        vec![14.0, -5.0, 1.0],
        vec![-5.0, 20.0, -4.0],
        vec![1.0, -4.0, 11.0],
    ]
    .map(|row| row.into_iter().map(|x| x / 51.0).collect::<Vec<_>>());
    assert_matrix_close(&matrix(&out["approx_inverse"]), &expect, 1e-15);
    assert_eq!(out["approx_error"], out["taylor_error"]);
    assert_eq!(out["det_m"], 1.0);
}

#[test]
fn approx_at_rank_is_exact() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", GENERAL);
    let out = json(&dyadic(&["approx", "--order", "2", p.to_str().unwrap()]));
    assert!(out["approx_error"].as_f64().unwrap() <= 1e-12);
    let exact = json(&dyadic(&["inverse", p.to_str().unwrap()]));
    assert_matrix_close(
        &matrix(&out["approx_inverse"]),
        &matrix(&exact["inverse"]),
        1e-12,
    );
}

#[test]
fn bench_is_deterministic_with_expected_row_count() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = dyadic(&[
            "bench",
            "--seed",
            "42",
            "--dims",
            "3",
            "--ranks",
            "2",
            "--trials",
            "10",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read(path).unwrap()
    };
    let first = run("a.csv");
    let second = run("b.csv");
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("dim,rank,trial,m,approx_error,taylor_error,det_a,regenerated")
    );
    // Orders default to 0..=max rank, here 0, 1, 2.
    assert_eq!(lines.count(), 10 * 3);
}

#[test]
fn bench_seed_falls_back_to_environment() {
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dyadic"));
        cmd.args([
            "bench", "--dims", "2", "--ranks", "2", "--trials", "3", "--orders", "1",
        ]);
        match seed {
            Some(s) => cmd.env("LOWRANK_SEED", s),
            None => cmd.env_remove("LOWRANK_SEED"),
        };
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let explicit = dyadic(&[
        "bench", "--seed", "7", "--dims", "2", "--ranks", "2", "--trials", "3", "--orders", "1",
    ]);
    assert_eq!(run(Some("7")), explicit.stdout);
    assert_ne!(run(Some("7")), run(None));
}

#[test]
fn bench_writes_summary() {
    let dir = TempDir::new().unwrap();
    let summary = dir.path().join("s.csv");
    let out = dyadic(&[
        "bench",
        "--seed",
        "1",
        "--dims",
        "2,3",
        "--ranks",
        "2",
        "--trials",
        "4",
        "--orders",
        "0..=2",
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(summary).unwrap();
    assert!(text.starts_with("dim,rank,m,trials,"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn malformed_json_exit_code() {
    let dir = TempDir::new().unwrap();
    let p = write(
        dir.path(),
        "p.json",
        r#"{"B": [[1, 0], [0, 1]], "dyads": ["#,
    );
    let out = dyadic(&["det", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
}

#[test]
fn missing_file_exit_code() {
    let out = dyadic(&["inverse", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dimension_mismatch_exit_code() {
    let dir = TempDir::new().unwrap();
    let p = write(
        dir.path(),
        "p.json",
        r#"{"B": [[1, 0], [0, 1]], "dyads": [{"v": [1, 0, 0], "p": [1, 0, 0]}]}"#,
    );
    let out = dyadic(&["det", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn singular_exit_codes() {
    let dir = TempDir::new().unwrap();
    let base = write(
        dir.path(),
        "b.json",
        r#"{"B": [[1, 0], [0, 0]], "dyads": [{"v": [1, 0], "p": [1, 0]}]}"#,
    );
    assert_eq!(
        dyadic(&["inverse", base.to_str().unwrap()]).status.code(),
        Some(6)
    );
    let perturbed = write(
        dir.path(),
        "a.json",
        r#"{"B": [[1, 0], [0, 1]], "dyads": [{"v": [-1, 0], "p": [1, 0]}]}"#,
    );
    assert_eq!(
        dyadic(&["inverse", perturbed.to_str().unwrap()])
            .status
            .code(),
        Some(6)
    );
}

#[test]
fn invalid_config_exit_code() {
    let out = dyadic(&["bench", "--dims", "1", "--ranks", "2", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(7));
}

#[test]
fn usage_exit_code() {
    assert_eq!(dyadic(&["bench", "--dims", "x"]).status.code(), Some(2));
    assert_eq!(dyadic(&[]).status.code(), Some(2));
}

#[test]
fn dual_problem_with_metric() {
    let dir = TempDir::new().unwrap();
    let p = write(
        dir.path(),
        "p.json",
        r#"{"B": [[2, 0], [0, 3]], "g": [[1, 0], [0, 1]],
            "w": [{"q": [1, 0], "p": [1, 0]}]}"#,
    );
    let out = json(&dyadic(&["inverse", p.to_str().unwrap()]));
    assert_matrix_close(
        &matrix(&out["inverse"]),
        &[vec![1.0 / 3.0, 0.0], vec![0.0, 1.0 / 3.0]],
        1e-14,
    );
}
