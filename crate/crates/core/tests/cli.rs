//! The `scwave` binary: exit codes, determinism and config round trips.

use std::path::Path;
use std::process::Command;

fn scwave() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scwave"))
}

fn run_small(dir: &Path) -> std::process::Output {
    scwave()
        .args([
            "run",
            "--preset",
            "harmonic_test",
            "--grid",
            "40",
            "--methods",
            "exact,sc,q,mixed",
            "--quiet",
            "--out-dir",
        ])
        .arg(dir)
        .output()
        .unwrap()
}

#[test]
fn runs_are_bit_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = run_small(d.path());
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in ["exact.wf", "sc.wf", "sc.flags", "q.wf", "mixed.wf"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn report_matches_the_written_fields() {
    let d = tempfile::tempdir().unwrap();
    let out = run_small(d.path());
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("overlap"));
    let report = scwave::runner::RunReport::from_toml(
        &std::fs::read_to_string(d.path().join("report.toml")).unwrap(),
    )
    .unwrap();
    for m in &report.methods {
        let again = scwave::runner::overlap_from_files(d.path(), m.method).unwrap();
        assert!((again - m.overlap).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&m.overlap));
    }
    for f in &report.files {
        assert!(f.exists());
    }
}

#[test]
fn exported_preset_runs_from_a_config_file() {
    let d = tempfile::tempdir().unwrap();
    let out = scwave().args(["export", "free_test"]).output().unwrap();
    assert!(out.status.success());
    let cfg = d.path().join("free.toml");
    std::fs::write(&cfg, out.stdout).unwrap();
    let out = scwave()
        .args(["run", "--grid", "40", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(d.path().join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn config_errors_exit_with_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "name = \"x\"\ntime = \"soon\"\n").unwrap();
    let out = scwave()
        .args(["run", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));

    let out = scwave().args(["run", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gaussian_well"));
}

#[test]
fn incompatible_methods_are_rejected_before_running() {
    let d = tempfile::tempdir().unwrap();
    let out = scwave()
        .args([
            "run",
            "--preset",
            "billiard",
            "--methods",
            "exact,sc",
            "--out-dir",
        ])
        .arg(d.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.path().join("o").exists());
}

#[test]
fn verify_filters_and_fails_with_a_named_invariant() {
    let out = scwave()
        .args(["verify", "--only", "quadratic"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS quadratic") && !text.contains("symplectic"));

    let out = scwave()
        .args(["verify", "--only", "symplectic", "--rel-tol", "1e-2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL symplectic"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let d = tempfile::tempdir().unwrap();
    let out = scwave()
        .env("SCWAVE_THREADS", "1")
        .args([
            "run",
            "--preset",
            "free_test",
            "--grid",
            "32",
            "--quiet",
            "--out-dir",
        ])
        .arg(d.path())
        .output()
        .unwrap();
    assert!(out.status.success());
}
