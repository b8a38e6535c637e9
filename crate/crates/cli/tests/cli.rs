use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fixtures.json")
}

fn waitent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waitent")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.json");
    fs::write(&p, text).unwrap();
    p
}

const PAIR: &str = r#""pair": {"states": ["a", "b"], "escape_rates": [1.0, 2.0], "jump_matrix": [[0.0, 1.0], [1.0, 0.0]]}"#;

#[test]
fn fixture_config_validates() {
    let o = waitent(&["validate", "--config", fixtures().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("all valid"));
}

#[test]
fn list_shows_models_and_plans() {
    let o = waitent(&["list", "--config", fixtures().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("pair_x") && s.contains("lln_cycle: lln cycle vs reversed"), "{s}");
}

#[test]
fn non_stochastic_row_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        r#"{"models": {"bad": {"states": ["a", "b"], "escape_rates": [1.0, 1.0], "jump_matrix": [[0.0, 0.9], [1.0, 0.0]]}}, "plans": {}}"#,
    );
    let o = waitent(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("row-stochastic"), "{}", stdout(&o));
}

#[test]
fn schedule_exponent_is_checked() {
    let d = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"models": {{{PAIR}}}, "plans": {{"s": {{"kind": "lln_schedule", "model_x": "pair", "schedule": {{"a": 1.0, "b": 0.6}}}}}}}}"#
    );
    let cfg = write_config(d.path(), &text);
    let o = waitent(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("b < 1/2"), "{}", stdout(&o));
}

#[test]
fn malformed_json_reports_location() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "{\n  \"models\": {\n    \"x\": [1, 2,\n}");
    let o = waitent(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn exact_prints_oracles() {
    let d = tempfile::tempdir().unwrap();
    let cfg = fixtures();
    let out = d.path().join("exact");
    let o = waitent(&["exact", "pair_x", "pair_y", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("relative_entropy_rate: 0.333333333333"), "{}", stdout(&o));
    assert!(out.join("oracle.json").exists());

    let o = waitent(&["exact", "cycle", "--reversed", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let s = stdout(&o);
    let v: f64 = s
        .lines()
        .find_map(|l| l.strip_prefix("relative_entropy_rate: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((v - 0.8 * 9f64.ln()).abs() < 1e-6, "{s}");

    // two-state chains are always reversible
    let o = waitent(&["exact", "pair_x", "--reversed", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout(&o).contains("relative_entropy_rate: 0.000000000000"), "{}", stdout(&o));
}

#[test]
fn exact_reads_model_files() {
    let d = tempfile::tempdir().unwrap();
    let m = d.path().join("m.json");
    fs::write(&m, r#"{"states": ["a", "b"], "escape_rates": [1.0, 2.0], "jump_matrix": [[0.0, 1.0], [1.0, 0.0]]}"#).unwrap();
    let n = d.path().join("n.json");
    fs::write(&n, r#"{"states": ["a", "b"], "escape_rates": [2.0, 1.0], "jump_matrix": [[0.0, 1.0], [1.0, 0.0]]}"#).unwrap();
    let o = waitent(&["exact", m.to_str().unwrap(), n.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("relative_entropy_rate: 0.333333333333"));
}

#[test]
fn run_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let cfg = fixtures();
    let mut files = Vec::new();
    for sub in ["a", "b"] {
        let out = d.path().join(sub);
        let o = waitent(&[
            "run", "lln_pair", "--config", cfg.to_str().unwrap(), "--seed", "5", "--replicas", "30",
            "--n", "60", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        files.push(names);
    }
    assert_eq!(files[0].len(), 2);
    for (x, y) in files[0].iter().zip(&files[1]) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn zero_replicas_is_a_usage_error() {
    let o = waitent(&["run", "lln_pair", "--config", fixtures().to_str().unwrap(), "--replicas", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn strict_mode_flags_large_deviations() {
    // the fixed-delta estimate on the ring sits far from the continuous rate
    let d = tempfile::tempdir().unwrap();
    let o = waitent(&[
        "run", "lln_cycle", "--config", fixtures().to_str().unwrap(), "--replicas", "100", "--strict",
        "--out", d.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn unknown_plan_and_bad_usage_exit_one() {
    let o = waitent(&["run", "nope", "--config", fixtures().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope"));
    assert_eq!(waitent(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(waitent(&["run"]).status.code(), Some(1));
    assert_eq!(waitent(&["--help"]).status.code(), Some(0));
}
