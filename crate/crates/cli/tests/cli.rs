use std::path::Path;
use std::process::{Command, Output};

use wheelleg_core::dynamics::linearize_at;
use wheelleg_core::lqr::{discretize, spectral_radius, GainSchedule};
use wheelleg_core::params::RobotParams;

fn wheelleg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wheelleg")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn flat_tracking_passes_and_report_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let out = wheelleg(&["simulate", "--scenario", "flat_tracking", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("flat_tracking.csv");
    assert!(csv.exists());
    assert!(dir.path().join("flat_tracking.summary.txt").exists());
    let stored = std::fs::read_to_string(dir.path().join("flat_tracking.report.txt")).unwrap();
    assert!(stored.starts_with("scenario flat_tracking (seed 0): PASS"), "{stored}");

    let again = wheelleg(&["report", path(&csv)]);
    assert_eq!(code(&again), 0);
    assert!(String::from_utf8_lossy(&again.stdout).contains("PASS"));
}

#[test]
fn unknown_scenario_lists_valid_names() {
    let out = wheelleg(&["simulate", "--scenario", "nope"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("flat_tracking") && err.contains("step_disturbance"), "{err}");
}

#[test]
fn weak_motors_fall_over() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("weak.toml");
    std::fs::write(&config, "[robot]\ntau_max = 1.0\n").unwrap();
    let out = wheelleg(&[
        "simulate", "--scenario", "spacewalk", "--config", path(&config),
        "--out", path(dir.path()), "--summary", "comment",
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = dir.path().join("spacewalk.csv");
    assert_eq!(code(&wheelleg(&["report", path(&csv)])), 4);
}

#[test]
fn criteria_miss_gives_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = wheelleg(&[
        "simulate", "--scenario", "spacewalk", "--duration", "2", "--out", path(dir.path()),
    ]);
    // The split oscillation only starts at 2.5 s.
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn synthesize_writes_a_loadable_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("gains.toml");
    assert_eq!(code(&wheelleg(&["synthesize", "--out", path(&sched)])), 0);
    let text = std::fs::read_to_string(&sched).unwrap();
    assert!(text.contains("version = 1"));
    let schedule = GainSchedule::load(&sched).unwrap();
    let params = RobotParams::default();
    for (&leg, k) in schedule.grid.iter().zip(&schedule.gains) {
        let lin = linearize_at(&params, leg, schedule.gamma0).unwrap();
        let (a, b) = discretize(&lin.a, &lin.b, schedule.dt);
        let rho = spectral_radius(&(a - b * k));
        assert!(rho < 1.0, "leg {leg}: {rho}");
    }
    let out = wheelleg(&[
        "simulate", "--scenario", "step_disturbance", "--schedule", path(&sched),
        "--out", path(dir.path()), "--noise", "off",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn bad_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("never.toml");
    for (name, text) in [("unknown.toml", "bogus = 3\n"), ("grid.toml", "[gains]\nn_grid = 1\n")] {
        let config = dir.path().join(name);
        std::fs::write(&config, text).unwrap();
        let out = wheelleg(&["synthesize", "--config", path(&config), "--out", path(&out_path)]);
        assert_eq!(code(&out), 2, "{name}");
        assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    }
    assert!(!out_path.exists());
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&wheelleg(&["verify", "--config", path(&missing)])), 2);
}

#[test]
fn verify_list_does_not_run() {
    let out = wheelleg(&["verify", "--list"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 10);
    assert!(text.contains("oracle equivalence"));
}

#[test]
fn verify_with_a_stale_schedule_reports() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("gains.toml");
    assert_eq!(code(&wheelleg(&["synthesize", "--out", path(&sched)])), 0);
    let heavy = dir.path().join("heavy.toml");
    std::fs::write(&heavy, "[robot]\nm_H = 18.75\n").unwrap();
    let out = wheelleg(&["verify", "--config", path(&heavy), "--schedule", path(&sched)]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(matches!(code(&out), 0 | 3), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count(), 10);
}
