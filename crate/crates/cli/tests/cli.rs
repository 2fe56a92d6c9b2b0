use std::fs;
use std::process::{Command, Output};

fn qkd_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkd-sim"))
        .args(args)
        .env_remove("QKD_SIM_THREADS")
        .output()
        .expect("failed to launch qkd-sim")
}

fn write_config(dir: &tempfile::TempDir, body: &str) -> String {
    let path = dir.path().join("scenario.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = qkd_sim(&["run", "--config", "delayed-11km", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "histogram.csv", "peaks.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("QBER"));
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, r#"{"mu_signal": 2.0, "n_pulses": 5000, "seed": 9}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(qkd_sim(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(qkd_sim(&["run", "--config", &cfg, "--out", b.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, r#"{"n_pulses": 5000, "seed": 4}"#);
    let o = qkd_sim(&["sweep", "--config", &cfg, "--param", "mu_signal", "--values", "0.5,1,2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().next().unwrap().starts_with("point,mu_signal,"));
}

#[test]
fn selftest_passes() {
    let o = qkd_sim(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("[FAIL]"));
}

#[test]
fn unknown_field_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, r#"{"mu_signl": 2.0}"#);
    let o = qkd_sim(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu_signl"));
}

#[test]
fn invalid_value_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, r#"{"mu_signal": -1.0}"#);
    let o = qkd_sim(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_exits_with_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = qkd_sim(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_rejects_unknown_param() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "{}");
    let o = qkd_sim(&["sweep", "--config", &cfg, "--param", "colour", "--values", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
