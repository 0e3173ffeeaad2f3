use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relay-rd"))
}

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn simulate_writes_outputs() {
    let out = tempfile::tempdir().unwrap();
    let cfg = manifest("configs/golden_thm1.toml");
    let o = run(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "series.csv",
        "events.jsonl",
        "fronts.csv",
        "report.json",
        "certificates.json",
        "series.json",
    ] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out.path().join("series.csv")).unwrap();
    assert!(csv.starts_with("t,v,w,U_bar,n_fronts,leftmost_front\n"));
    let events = std::fs::read_to_string(out.path().join("events.jsonl")).unwrap();
    for line in events.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for k in ["kind", "t", "position", "U_ratio"] {
            assert!(v.get(k).is_some(), "{line}");
        }
    }
}

#[test]
fn config_flag_is_accepted() {
    let out = tempfile::tempdir().unwrap();
    let cfg = manifest("configs/golden_thm1.toml");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "simulate",
    ]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn verify_golden_series() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "verify",
        "thm1",
        manifest("tests/data/series_thm1.json").to_str().unwrap(),
        manifest("tests/data/plan_thm1.json").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "verified");
    // frozen from the run that produced the fixture
    assert_eq!(report["observations"][0]["measured_min"], 2);
}

#[test]
fn wrong_plan_is_a_verification_failure() {
    let out = tempfile::tempdir().unwrap();
    let plan = out.path().join("plan.json");
    let mut p: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(manifest("tests/data/plan_thm1.json")).unwrap())
            .unwrap();
    // observe far right of every front
    p["x"][0] = serde_json::json!(0.249);
    p["x"][1] = serde_json::json!(0.2495);
    std::fs::write(&plan, p.to_string()).unwrap();
    let o = run(&[
        "verify",
        "thm1",
        manifest("tests/data/series_thm1.json").to_str().unwrap(),
        plan.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(run(&["simulate", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn malformed_config_is_line_anchored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let src = std::fs::read_to_string(manifest("configs/golden_thm1.toml")).unwrap();
    std::fs::write(&cfg, src.replace("D = 1e-3", "D = -1e-3")).unwrap();
    let o = run(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");

    std::fs::write(&cfg, "D = 1e-3\n[domain\nlo = 0.05\n").unwrap();
    let o = run(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn missing_config_exits_2() {
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    assert_eq!(run(&["asymptotics", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn sequences_and_kernels() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "sequences",
        "thm2",
        "--N",
        "2",
        "--mu",
        "0.25",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.path().join("plan_thm2.json").exists());
    let o = run(&[
        "sequences",
        "thm1",
        "--N",
        "2",
        "--margin",
        "0.7",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&[
        "kernels",
        manifest("configs/kernel_sweep.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.path().join("kernels.csv").exists());
}
