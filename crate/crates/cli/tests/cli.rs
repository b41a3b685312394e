//! Drives the `levycop` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn levycop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levycop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = levycop(args);
    assert!(
        out.status.success(),
        "levycop {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(p: &Path) -> Vec<String> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(String::from)
        .collect()
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    let p = panel.to_str().unwrap();
    ok(&[
        "simulate",
        "--model",
        "jump:1,1.5",
        "--n",
        "2000",
        "--seed",
        "7",
        "--out",
        p,
    ]);
    assert_eq!(data_rows(&panel).len(), 2000);

    // same seed, same bytes
    let again = dir.path().join("again.csv");
    ok(&[
        "simulate",
        "--model",
        "jump:1,1.5",
        "--n",
        "2000",
        "--seed",
        "7",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&panel).unwrap(), fs::read(&again).unwrap());

    let est = dir.path().join("est");
    let stdout = ok(&[
        "estimate",
        "--panel",
        p,
        "--regime",
        "cpp",
        "--lambda",
        "1",
        "--grid",
        "64",
        "--out",
        est.to_str().unwrap(),
    ]);
    assert!(stdout.contains("n=2000"), "{stdout}");
    for f in ["tail.csv", "marginal1.csv", "marginal2.csv", "copula.csv"] {
        assert!(est.join(f).is_file(), "{f} missing");
    }
    let cells = data_rows(&est.join("copula.csv"));
    assert_eq!(cells.len(), 25 * 25);
    for row in &cells {
        let v: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(v >= 0.0, "{row}");
    }
}

#[test]
fn cpp_estimate_needs_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    let p = panel.to_str().unwrap();
    ok(&["simulate", "--model", "jump:1,1", "--n", "200", "--out", p]);
    let out = levycop(&[
        "estimate",
        "--panel",
        p,
        "--grid",
        "64",
        "--out",
        dir.path().join("e").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--lambda"));
}

#[test]
fn unknown_model_is_rejected() {
    let out = levycop(&["simulate", "--model", "gamma:2", "--n", "10", "--out", "/dev/null"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model"));
}

#[test]
fn truth_table_has_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("truth.csv");
    ok(&[
        "truth",
        "--model",
        "cpp_log",
        "--points",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(data_rows(&out).len(), 16);
}

#[test]
fn experiment_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("rep");
    let r = rep.to_str().unwrap();
    let stdout = ok(&[
        "experiment",
        "--model",
        "jump:1,1.5",
        "--n",
        "256,512,1024",
        "--reps",
        "2",
        "--seed",
        "3",
        "--grid",
        "64",
        "--workers",
        "1",
        "--out",
        r,
    ]);
    assert!(stdout.contains("slope"), "{stdout}");
    for f in [
        "errors.csv",
        "summary.csv",
        "rates.csv",
        "timings.csv",
        "manifest.txt",
        "config.toml",
    ] {
        assert!(rep.join(f).is_file(), "{f} missing");
    }
    assert_eq!(data_rows(&rep.join("errors.csv")).len(), 6);
    let summary = fs::read(rep.join("summary.csv")).unwrap();

    // a config written by one run reproduces it
    let rerun = dir.path().join("rerun");
    let cfg = rep.join("config.toml");
    ok(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        rerun.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(rep.join("errors.csv")).unwrap(),
        fs::read(rerun.join("errors.csv")).unwrap()
    );

    fs::remove_file(rep.join("summary.csv")).unwrap();
    ok(&["report", "--out", r]);
    assert_eq!(fs::read(rep.join("summary.csv")).unwrap(), summary);
}

#[test]
fn quick_preset_prints_verdict() {
    let stdout = ok(&["experiment", "--preset", "ac1"]);
    assert!(stdout.starts_with("AC1 PASS"), "{stdout}");
}
