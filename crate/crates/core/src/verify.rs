//! The ten acceptance checks, shared by the command line and the test suite.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{Matrix1, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    controllability_rank, finite_difference_jacobian, linearize, newton_euler, nonlinear_accel,
    PlanarPlantState, SagittalModel,
};
use crate::error::Result;
use crate::lqr::{build_gain_schedule, solve_dare, synthesize_point, GainSchedule, STABILITY_MARGIN};
use crate::params::{ControllerGains, RobotParams};
use crate::sim::log::rows_to_csv;
use crate::sim::plant::passive_energy_drift;
use crate::sim::runner::run_scenario;
use crate::sim::scenario::{scenario_by_name, SCENARIO_NAMES};

pub const LINEARIZATION_TOLERANCE: f64 = 1e-5;
pub const LINEARIZATION_LEGS: [f64; 3] = [0.18, 0.22, 0.28];
pub const GOLDEN_TOLERANCE: f64 = 1e-9;
pub const FLAT_TRACKING_WALL_CLOCK: Duration = Duration::from_secs(10);
pub const SCHEDULE_WALL_CLOCK: Duration = Duration::from_secs(5);
pub const ENERGY_TOLERANCE: f64 = 1e-6;
pub const ORACLE_SAMPLES: usize = 1000;
pub const ORACLE_TOLERANCE: f64 = 1e-9;

/// `(id, name)` of every criterion in report order.
pub const CRITERIA: [(u8, &str); 10] = [
    (1, "linearization consistency"),
    (2, "controllability"),
    (3, "DARE correctness"),
    (4, "flat tracking"),
    (5, "pitch hold"),
    (6, "slope roll"),
    (7, "spacewalk"),
    (8, "energy conservation"),
    (9, "determinism"),
    (10, "oracle equivalence"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub threshold: String,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} (required {}) [{:.2} s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.threshold,
            self.elapsed.as_secs_f64()
        )?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

fn name_of(id: u8) -> &'static str {
    CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1)
}

struct Outcome {
    passed: bool,
    measured: String,
    threshold: String,
    detail: String,
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn linearization(params: &RobotParams) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for &len in &LINEARIZATION_LEGS {
        let lin = linearize(params, len)?;
        let (ja, jb_t) = finite_difference_jacobian(params, &lin, 1e-6);
        let a_core = lin.a.fixed_view::<3, 6>(3, 0).into_owned();
        let b_core = lin.b.fixed_view::<3, 2>(3, 0).into_owned();
        worst = worst.max((ja - a_core).norm() / a_core.norm());
        worst = worst.max((jb_t.transpose() - b_core).norm() / b_core.norm());
    }
    Ok(Outcome {
        passed: worst <= LINEARIZATION_TOLERANCE,
        measured: format!("max relative error {worst:.2e}"),
        threshold: format!("<= {LINEARIZATION_TOLERANCE:e} at L = {LINEARIZATION_LEGS:?} m"),
        detail: String::new(),
    })
}

fn controllability(params: &RobotParams) -> Result<Outcome> {
    let rank = controllability_rank(&linearize(params, 0.22)?);
    Ok(Outcome {
        passed: rank == 8,
        measured: format!("rank {rank}"),
        threshold: "rank 8".into(),
        detail: String::new(),
    })
}

fn dare(params: &RobotParams, gains: &ControllerGains) -> Result<Outcome> {
    let one = Matrix1::new(1.0);
    let golden = solve_dare(&one, &one, &one, &one)?.p[0];
    let golden_err = (golden - (1.0 + 5f64.sqrt()) / 2.0).abs();

    let start = Instant::now();
    let schedule = build_gain_schedule(params, gains, gains.n_grid)?;
    let schedule_time = start.elapsed();
    let mut worst_residual: f64 = 0.0;
    let mut worst_rho: f64 = 0.0;
    for &len in &schedule.grid {
        let point = synthesize_point(params, gains, len, 0.0)?;
        worst_residual = worst_residual.max(point.dare.residual / (1.0 + point.dare.p.norm()));
        worst_rho = worst_rho.max(point.spectral_radius);
    }
    let passed = golden_err <= GOLDEN_TOLERANCE
        && worst_residual <= 1e-9
        && worst_rho < STABILITY_MARGIN
        && schedule_time < SCHEDULE_WALL_CLOCK;
    Ok(Outcome {
        passed,
        measured: format!(
            "residual/(1+|P|) {worst_residual:.2e}, golden error {golden_err:.1e}, max rho {worst_rho:.6}, \
             {}-point schedule in {:.2} s",
            schedule.grid.len(),
            schedule_time.as_secs_f64()
        ),
        threshold: format!(
            "<= 1e-9, <= {GOLDEN_TOLERANCE:e}, < {STABILITY_MARGIN}, < {} s",
            SCHEDULE_WALL_CLOCK.as_secs()
        ),
        detail: String::new(),
    })
}

fn scenario(
    name: &str,
    params: &RobotParams,
    gains: &ControllerGains,
    schedule: &GainSchedule,
    wall_clock: Option<Duration>,
) -> Result<Outcome> {
    let sc = scenario_by_name(name)?;
    let start = Instant::now();
    let log = run_scenario(&sc, params, gains, schedule)?;
    let elapsed = start.elapsed();
    let verdict = sc.evaluate(&log.metrics);
    let mut measured: Vec<String> = verdict
        .checks
        .iter()
        .map(|c| format!("{} {:.4}", c.name, c.measured))
        .collect();
    let mut threshold: Vec<String> = verdict
        .checks
        .iter()
        .map(|c| c.requirement())
        .collect();
    let mut passed = verdict.passed();
    if let Some(limit) = wall_clock {
        measured.push(format!("wall clock {:.2} s", elapsed.as_secs_f64()));
        threshold.push(format!("wall clock < {} s", limit.as_secs()));
        passed &= elapsed < limit;
    }
    let mut detail = verdict.notes.join("; ");
    if let Some(t) = &verdict.terminated {
        detail = format!("run ended early: {t}");
    }
    Ok(Outcome {
        passed,
        measured: measured.join(", "),
        threshold: threshold.join(", "),
        detail,
    })
}

fn energy(params: &RobotParams) -> Result<Outcome> {
    let model = SagittalModel::new(params, 0.22)?;
    let drift = passive_energy_drift(&model, &Vector3::new(0.1, 0.1, 0.0), 1e-3, 5.0);
    Ok(Outcome {
        passed: drift <= ENERGY_TOLERANCE,
        measured: format!("relative drift {drift:.2e}"),
        threshold: format!("<= {ENERGY_TOLERANCE:e} over 5 s"),
        detail: String::new(),
    })
}

fn determinism(params: &RobotParams, gains: &ControllerGains, schedule: &GainSchedule) -> Result<Outcome> {
    let mut differing = Vec::new();
    for name in SCENARIO_NAMES {
        let sc = scenario_by_name(name)?;
        let a = rows_to_csv(&run_scenario(&sc, params, gains, schedule)?.rows)?;
        let b = rows_to_csv(&run_scenario(&sc, params, gains, schedule)?.rows)?;
        if a != b {
            differing.push(name);
        }
    }
    Ok(Outcome {
        passed: differing.is_empty(),
        measured: if differing.is_empty() {
            format!("{} scenarios byte-identical", SCENARIO_NAMES.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
        threshold: "identical CSV bytes".into(),
        detail: String::new(),
    })
}

fn oracle(params: &RobotParams) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..ORACLE_SAMPLES {
        let len = rng.random_range(0.12..=params.full_leg_length());
        let q = Vector3::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2), rng.random_range(-5.0..5.0));
        let qd = Vector3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-3.0..3.0));
        let tau_h = rng.random_range(-params.tau_max..params.tau_max) * 2.0;
        let tau_w = rng.random_range(-params.tau_max..params.tau_max) * 2.0;
        let state = PlanarPlantState::from_generalized(&q, &qd, params.beta0, len);
        let fast = nonlinear_accel(&state, tau_h, tau_w, params)?;
        let model = SagittalModel::new(params, len)?;
        let Some((qdd, forces)) = newton_euler::solve(&model, &q, &qd, tau_h, tau_w) else {
            worst = f64::INFINITY;
            break;
        };
        let pairs = [
            (fast.theta_ddot, qdd[1]),
            (fast.beta_ddot, -qdd[0] - qdd[1]),
            (fast.x_ddot, qdd[2]),
            (fast.forces.f_f, forces.f_f),
            (fast.forces.f_n, forces.f_n),
            (fast.forces.f_x1, forces.f_x1),
            (fast.forces.f_z1, forces.f_z1),
            (fast.forces.f_x2, forces.f_x2),
            (fast.forces.f_z2, forces.f_z2),
        ];
        for (a, b) in pairs {
            worst = worst.max(relative(a, b));
        }
    }
    Ok(Outcome {
        passed: worst <= ORACLE_TOLERANCE,
        measured: format!("max relative difference {worst:.2e} over {ORACLE_SAMPLES} draws"),
        threshold: format!("<= {ORACLE_TOLERANCE:e}"),
        detail: String::new(),
    })
}

/// Runs one criterion. `schedule` is the upright schedule for the
/// scenario criteria; it is built on demand when absent.
pub fn run_criterion(
    id: u8,
    params: &RobotParams,
    gains: &ControllerGains,
    schedule: Option<&GainSchedule>,
) -> CriterionResult {
    let start = Instant::now();
    let owned;
    let schedule = match (id, schedule) {
        (4..=7 | 9, None) => match build_gain_schedule(params, gains, gains.n_grid) {
            Ok(s) => {
                owned = s;
                Some(&owned)
            }
            Err(e) => return failed(id, start, e.to_string()),
        },
        (_, s) => s,
    };
    let outcome = match id {
        1 => linearization(params),
        2 => controllability(params),
        3 => dare(params, gains),
        4 => scenario("flat_tracking", params, gains, schedule.unwrap(), Some(FLAT_TRACKING_WALL_CLOCK)),
        5 => scenario("pitch_hold", params, gains, schedule.unwrap(), None),
        6 => scenario("slope_roll", params, gains, schedule.unwrap(), None),
        7 => scenario("spacewalk", params, gains, schedule.unwrap(), None),
        8 => energy(params),
        9 => determinism(params, gains, schedule.unwrap()),
        10 => oracle(params),
        _ => return failed(id, start, format!("no criterion {id}")),
    };
    match outcome {
        Ok(o) => CriterionResult {
            id,
            name: name_of(id),
            passed: o.passed,
            measured: o.measured,
            threshold: o.threshold,
            detail: o.detail,
            elapsed: start.elapsed(),
        },
        Err(e) => failed(id, start, e.to_string()),
    }
}

fn failed(id: u8, start: Instant, detail: String) -> CriterionResult {
    CriterionResult {
        id,
        name: name_of(id),
        passed: false,
        measured: "error".into(),
        threshold: "-".into(),
        detail,
        elapsed: start.elapsed(),
    }
}

/// All criteria, run concurrently, reported in id order. Without a
/// `schedule` one is synthesized from `params` and `gains`.
pub fn run_all(
    params: &RobotParams,
    gains: &ControllerGains,
    schedule: Option<&GainSchedule>,
) -> Vec<CriterionResult> {
    let owned = match schedule {
        Some(_) => None,
        None => build_gain_schedule(params, gains, gains.n_grid).ok(),
    };
    let schedule = schedule.or(owned.as_ref());
    std::thread::scope(|scope| {
        let handles: Vec<_> = CRITERIA
            .iter()
            .map(|&(id, _)| {
                scope.spawn(move || run_criterion(id, params, gains, schedule))
            })
            .collect();
        handles
            .into_iter()
            .zip(CRITERIA)
            .map(|(h, (id, _))| {
                h.join().unwrap_or_else(|_| failed(id, Instant::now(), "criterion panicked".into()))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_criterion_fails() {
        let r = run_criterion(42, &RobotParams::default(), &ControllerGains::default(), None);
        assert!(!r.passed);
        assert_eq!(r.name, "unknown");
    }

    #[test]
    fn report_line_shape() {
        let r = run_criterion(2, &RobotParams::default(), &ControllerGains::default(), None);
        let line = r.to_string();
        assert!(line.starts_with("[PASS]  2 controllability: rank 8"), "{line}");
    }
}
