//! Exit-status and error-record contract of the installed binary.

use std::process::Command;

fn zibr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zibr"))
}

#[test]
fn simulate_then_fit_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let status = zibr()
        .args(["simulate", "--scenario", "setting2", "--seed", "3"])
        .arg("--out")
        .arg(&sim)
        .status()
        .unwrap();
    assert!(status.success());

    let out = dir.path().join("fit");
    let output = zibr()
        .arg("fit")
        .arg(sim.join("dataset.csv"))
        .args(["--x-cols", "treatment", "--z-cols", "treatment"])
        .args(["--k1", "10", "--k2", "5", "--chains", "2", "--is-samples", "50"])
        .args(["--seed", "42"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    for name in ["estimates.csv", "loglik.txt", "trace.csv", "manifest.txt"] {
        assert!(stdout.contains(name), "stdout should list {name}:\n{stdout}");
        assert!(out.join(name).exists());
    }
}

#[test]
fn missing_seed_is_a_hard_error() {
    let output = zibr()
        .args(["simulate", "--scenario", "setting2", "--out", "/tmp/nowhere"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error kind=validation"), "stderr: {stderr}");
    assert!(stderr.contains("--seed"));
}

#[test]
fn bad_csv_reports_machine_readable_record() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "subject,time,y,treat\ns1,1,1.0,0\n").unwrap();
    let output = zibr()
        .arg("fit")
        .arg(&bad)
        .args(["--x-cols", "treat", "--z-cols", "treat", "--seed", "1"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error kind=csv"), "stderr: {stderr}");
    assert!(stderr.contains("line 2"));
}
