use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fourwids"));
    c.env_remove("FOURWIDS_OUT_DIR");
    c
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(format!("{name}.toml"))
}

#[test]
fn run_writes_csv_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(bundled("ledge"))
        .arg("-o")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["name"], "ledge");
    assert!(summary["settle_time"].is_number());
    assert!(dir.path().join("ledge.csv").exists());
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .env("FOURWIDS_OUT_DIR", dir.path())
        .arg("run")
        .arg(bundled("drop_uncontrolled"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("drop_uncontrolled.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "roll = 3\n").unwrap();
    let out = bin().arg("run").arg(&bad).arg("-o").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let missing = bin().arg("run").arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unknown_sweep_parameter_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sweep"])
        .arg(bundled("drop_controlled"))
        .args(["--param", "warp_factor", "--values", "1,2", "-o"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_finite_state_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("blowup.toml");
    std::fs::write(&cfg, "omega_x = 1e300\nwheel_speed_max = 1e308\n").unwrap();
    let out = bin().arg("run").arg(&cfg).arg("-o").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn compare_and_sweep_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("compare")
        .arg(bundled("drop_controlled"))
        .arg(bundled("drop_uncontrolled"))
        .arg("-o")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .arg("sweep")
        .arg(bundled("drop_controlled"))
        .args(["--param", "tau_wheel_max", "--values", "4,8", "-o"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let pts: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(pts.as_array().unwrap().len(), 2);
}

#[test]
fn csv_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(bin()
            .arg("run")
            .arg(bundled("drop_controlled"))
            .arg("-o")
            .arg(d.path())
            .output()
            .unwrap()
            .status
            .success());
    }
    let x = std::fs::read(a.path().join("drop_controlled.csv")).unwrap();
    let y = std::fs::read(b.path().join("drop_controlled.csv")).unwrap();
    assert_eq!(x, y);
}
