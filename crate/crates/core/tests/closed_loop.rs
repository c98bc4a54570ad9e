use wheelleg_core::lqr::{build_gain_schedule, GainSchedule};
use wheelleg_core::params::{ControllerGains, RobotParams};
use wheelleg_core::sim::{
    builtin_scenarios, run_scenario, scenario_by_name, NoiseConfig, SummaryPlacement,
    TrajectoryLog,
};

fn setup() -> (RobotParams, ControllerGains, GainSchedule) {
    let p = RobotParams::default();
    let g = ControllerGains::default();
    let s = build_gain_schedule(&p, &g, g.n_grid).unwrap();
    (p, g, s)
}

#[test]
fn every_scenario_respects_torque_limits_and_round_trips() {
    let (p, g, s) = setup();
    let dir = tempfile::tempdir().unwrap();
    for sc in builtin_scenarios() {
        let log = run_scenario(&sc, &p, &g, &s).unwrap();
        assert!(log.metrics.termination.is_none(), "{}", sc.name);
        let expected_rows = (sc.duration / g.control_dt).round() as usize + 1;
        assert_eq!(log.rows.len(), expected_rows, "{}", sc.name);
        for r in &log.rows {
            for c in r.commands() {
                assert!(c.abs() <= p.tau_max + 1e-12, "{} at {}: {c}", sc.name, r.t);
            }
        }
        let path = dir.path().join(format!("{}.csv", sc.name));
        log.write(&path, SummaryPlacement::TrailingComment).unwrap();
        let back = TrajectoryLog::read(&path).unwrap();
        assert_eq!(back.metrics, log.metrics, "{}", sc.name);
        assert_eq!(sc.evaluate(&back.metrics), sc.evaluate(&log.metrics));
    }
}

#[test]
fn seeds_are_reproducible_and_distinct() {
    let (p, g, s) = setup();
    let mut sc = scenario_by_name("step_disturbance").unwrap();
    sc.duration = 1.0;
    let a = run_scenario(&sc, &p, &g, &s).unwrap();
    let b = run_scenario(&sc, &p, &g, &s).unwrap();
    assert_eq!(a, b);
    sc.seed += 1;
    let c = run_scenario(&sc, &p, &g, &s).unwrap();
    assert_ne!(a.rows, c.rows);
}

#[test]
fn noiseless_straight_run_is_mirror_symmetric() {
    let (p, g, s) = setup();
    let mut sc = scenario_by_name("flat_tracking").unwrap();
    sc.noise = NoiseConfig::off();
    sc.duration = 4.0;
    let log = run_scenario(&sc, &p, &g, &s).unwrap();
    for r in &log.rows {
        assert_eq!(r.tau_hip_l, r.tau_hip_r, "t = {}", r.t);
        assert_eq!(r.tau_knee_l, r.tau_knee_r, "t = {}", r.t);
        assert_eq!(r.tau_wheel_l, r.tau_wheel_r, "t = {}", r.t);
        assert_eq!([r.psi, r.yaw, r.split], [0.0; 3], "t = {}", r.t);
    }
    assert!(log.rows.last().unwrap().x > 1.0);
}

#[test]
fn heavier_head_without_resynthesis_is_reported_not_fatal() {
    let (p, g, s) = setup();
    let mut heavy = p.clone();
    heavy.m_head *= 1.5;
    let sc = scenario_by_name("flat_tracking").unwrap();
    let nominal = run_scenario(&sc, &p, &g, &s).unwrap();
    let perturbed = run_scenario(&sc, &heavy, &g, &s).unwrap();
    let worse = perturbed.metrics.termination.is_some()
        || perturbed.metrics.max_abs_gamma > nominal.metrics.max_abs_gamma
        || perturbed.metrics.max_abs_theta > nominal.metrics.max_abs_theta;
    assert!(worse, "{:?} vs {:?}", perturbed.metrics, nominal.metrics);
}
