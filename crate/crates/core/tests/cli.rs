use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adjoint-pod"))
}

const SMALL: [&str; 6] = ["--set", "grid.nx=17", "--set", "grid.ny=17", "--set", "problem.steps=20"];

#[test]
fn forward_writes_the_final_state() {
    let tmp = tempfile::tempdir().unwrap();
    let status = bin()
        .arg("forward")
        .args(SMALL)
        .arg("--out")
        .arg(tmp.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(tmp.path().join("final_state.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17 + 1);
    assert!(csv.lines().nth(1).unwrap().split(',').count() == 17);
}

#[test]
fn invert_prints_metrics_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("invert")
        .args(SMALL)
        .args(["--set", "measurement.detectors=15", "--set", "problem.kind=backward"])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["kind"], "backward");
    assert!(m["rel_l2_error"].as_f64().unwrap().is_finite());
    assert!(tmp.path().join("metrics.json").exists());
    assert!(tmp.path().join("basis").is_dir());
}

#[test]
fn errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("forward")
        .args(["--set", "problem.truth=nosuchshape"])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuchshape"));
    let bad = bin().args(["--set", "grid.bogus=3", "forward"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
