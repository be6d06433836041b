use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_smoothinglab");

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# smoothinglab "));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn exponent_of_the_dyadic_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), r#"{"seed": 1, "model": {"family": "deterministic", "params": {"weights": [0.5, 0.5]}}}"#, &["exponent"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = rows(&dir.path().join("out/exponent.csv"));
    let col = header.iter().position(|h| h == "alpha").unwrap();
    let alpha: f64 = rows[0][col].parse().unwrap();
    assert!((alpha - 1.0).abs() < 1e-10);
    let text = fs::read_to_string(dir.path().join("out/exponent.csv")).unwrap();
    assert!(text.lines().next().unwrap().contains("module=exponent op=solve_alpha seed=1"));
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [r#"{"seed": 1, "model": "#, r#"{"model": {"family": "deterministic", "params": {"weights": [0.5]}}}"#, r#"{"seed": 1, "colour": 2}"#] {
        let out = run(dir.path(), bad, &["exponent"]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(!dir.path().join("out").exists());
    }
}

#[test]
fn missing_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), r#"{"seed": 1}"#, &["exponent"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn population_cap_is_a_budget_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"seed": 1, "model": {"family": "deterministic", "params": {"weights": [0.5, 0.5]}},
                  "alpha": 1, "budgets": {"generations": 12, "pop_cap": 100}}"#;
    let out = run(dir.path(), cfg, &["simulate-brw"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn verify_exponent_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), r#"{"seed": 7}"#, &["verify", "exponent"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = rows(&dir.path().join("out/checks.csv"));
    let pass = header.iter().position(|h| h == "pass").unwrap();
    assert!(!rows.is_empty() && rows.iter().all(|r| r[pass] == "true"));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let cfg = r#"{"seed": 11, "model": {"family": "gaussian_binary", "params": {"mean": 1.386294361119891, "variance": 1.386294361119891}},
                  "alpha": 1, "budgets": {"reps": 300, "generations": 6}}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), cfg, &["--workers", "1", "martingale"]).status.code(), Some(0));
    assert_eq!(run(b.path(), cfg, &["--workers", "3", "martingale"]).status.code(), Some(0));
    let x = fs::read(a.path().join("out/martingale.csv")).unwrap();
    let y = fs::read(b.path().join("out/martingale.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn seed_override_changes_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), r#"{"seed": 1, "model": {"family": "deterministic", "params": {"weights": [0.25, 0.25]}}}"#, &["--seed", "99", "exponent"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("out/exponent.csv")).unwrap();
    assert!(text.lines().next().unwrap().ends_with("seed=99"));
}
