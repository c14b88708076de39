use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lanequeue"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn assignment_prints_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["assignment", "--config"])
        .arg(config("s2.cfg"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("assignment.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("0.7"));
}

#[test]
fn simulate_and_experiment_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["simulate", "--seed", "3", "--config"])
        .arg(config("s1.cfg"))
        .arg("--out-dir")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["trace_cycles.csv", "trace_exits.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let status = bin()
        .args(["experiment", "--p-grid", "0.4,0.8", "--replications", "1", "--sequential", "--config"])
        .arg(config("s1.cfg"))
        .arg("--out-dir")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["mae.csv", "fig_penetration.csv", "fig_probe_counts.csv", "fig_queues.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    let text = std::fs::read_to_string(config("s1.cfg")).unwrap().replace("p = 0.5", "p = 1.5");
    std::fs::write(&bad, text).unwrap();
    let out = bin().args(["simulate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["simulate", "--config"]).arg(dir.path().join("missing.cfg")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(config("s1.cfg"))
        .arg("--out-dir")
        .arg(&blocker)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
