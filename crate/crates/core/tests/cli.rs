use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn vicinal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vicinal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_with(dir: &Path, name: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{name}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(name);
    let mut args = vec![
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    vicinal(&args)
}

#[test]
fn successful_run_exits_zero_and_writes_artifacts() {
    let dir = tempdir().unwrap();
    let out = run_with(
        dir.path(),
        "ok",
        r#"{"kind": "run", "initial": {"sine_cubed": {"A": 0.1, "M": 1.0}}, "n": 32, "epsilon": 1e-3, "t_end": 1e-5}"#,
        &["--format", "json"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "series.json",
        "verdicts.json",
        "metadata.json",
        "snapshot_initial.json",
        "snapshot_final.json",
    ] {
        assert!(dir.path().join("ok").join(f).is_file(), "missing {f}");
    }
}

#[test]
fn failed_verdict_exits_one() {
    let dir = tempdir().unwrap();
    let out = run_with(
        dir.path(),
        "short",
        r#"{"kind": "longtime", "initial": {"sine_cubed": {"A": 0.1, "M": 1.0}}, "n": 32, "t_end": 1e-5}"#,
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempdir().unwrap();
    for (name, cfg) in [
        (
            "negative",
            r#"{"kind": "run", "initial": "degenerate_sine", "t_end": -1}"#,
        ),
        (
            "unknown",
            r#"{"kind": "run", "initial": "degenerate_sine", "t_end": 1, "colour": 3}"#,
        ),
        ("syntax", "{"),
    ] {
        let out = run_with(dir.path(), name, cfg, &[]);
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
    let out = vicinal(&[
        "run",
        "--config",
        dir.path().join("absent.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempdir().unwrap();
    let out = run_with(
        dir.path(),
        "underflow",
        r#"{"kind": "run", "initial": {"sine_cubed": {"A": 0.1, "M": 1.0}}, "n": 20000, "epsilon": 1e-3,
            "t_end": 1e-6, "scheme": "explicit_rk4"}"#,
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("underflow"));
}

#[test]
fn sweep_promotes_a_run_configuration() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"kind": "run", "initial": "degenerate_sine", "n": 32, "epsilon": [1e-2, 1e-3], "t_end": 1e-5}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = vicinal(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sweep = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
}

#[test]
fn quick_check_prints_one_line_per_criterion() {
    let out = vicinal(&["check", "--quick"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("criterion"))
        .collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.contains("PASS")));
}
