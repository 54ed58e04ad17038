use std::path::Path;
use std::process::Command;

use coagbreak::io::config::RunConfig;
use coagbreak::io::output::parse_moments_csv;

fn coagbreak(args: &[&str], config: &Path, out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_coagbreak"))
        .args(args)
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn verify_default_scenario_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "default.cfg", &RunConfig::default().emit());
    let out = coagbreak(&["verify"], &cfg, &dir.path().join("out"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{stdout}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout.contains("moment_bounds=pass"));
    assert!(stdout.contains(&format!(
        "fingerprint={}",
        RunConfig::default().fingerprint()
    )));
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert_eq!(report, stdout);
}

#[test]
fn inadmissible_exponent_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.kernel.alpha = 0.0;
    let path = write_config(dir.path(), "alpha0.cfg", &cfg.emit());
    let out = coagbreak(&["verify"], &path, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("alpha"), "{stderr}");
    assert!(!dir.path().join("out/report.txt").exists());
}

#[test]
fn malformed_and_missing_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.cfg",
        "[mesh]\ncells = many\n[nowhere]\nx = 1\n",
    );
    let out = coagbreak(&["run"], &bad, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("cells") && stderr.contains("nowhere"),
        "{stderr}"
    );

    let out = coagbreak(
        &["run"],
        &dir.path().join("absent.cfg"),
        &dir.path().join("out"),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_threads_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "default.cfg", &RunConfig::default().emit());
    let out = coagbreak(&["run", "--threads", "0"], &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_parseable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.mesh.cells = 64;
    let path = write_config(dir.path(), "small.cfg", &cfg.emit());
    let out = coagbreak(&["run"], &path, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(0));
    let moments = std::fs::read_to_string(dir.path().join("out/moments.csv")).unwrap();
    let rows = parse_moments_csv(&moments).unwrap();
    assert_eq!(rows.first().unwrap().t, 0.0);
    assert_eq!(rows.last().unwrap().t, 1.0);
}

#[test]
fn oracle_compare_without_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_coagbreak"))
        .args(["oracle-compare", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(dir.path().join("oracle.txt").exists());
}

#[test]
fn convergence_study_needs_three_levels() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.mesh.cells = 32;
    cfg.mesh.n = 12.5;
    cfg.mesh.z_min = 4e-4;
    let path = write_config(dir.path(), "coarse.cfg", &cfg.emit());
    let out = coagbreak(&["convergence-study", "--levels", "2"], &path, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = coagbreak(&["convergence-study", "--levels", "3"], &path, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(dir.path().join("convergence.txt").exists());
}
