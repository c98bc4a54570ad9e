//! Closed-loop scenario runs: plant at the physics rate, estimator and
//! controller at the control rate with commands held in between.

use crate::control::MotionController;
use crate::error::Result;
use crate::estimation::Estimator;
use crate::lqr::{build_gain_schedule_at, GainSchedule};
use crate::params::{ControllerGains, RobotParams};
use crate::sim::log::{LogRow, TrajectoryLog};
use crate::sim::plant::{FullPlantState, Plant, PlantAccel};
use crate::sim::scenario::Scenario;
use crate::sim::sensors::SensorModel;

/// Schedules whose linearization pitch differs by more than this are
/// rebuilt for the scenario.
const OPERATING_PITCH_TOLERANCE: f64 = 1e-9;

/// Gains linearized about the scenario's head pitch, reusing `schedule`
/// when it already matches.
pub fn schedule_for(
    scenario: &Scenario,
    params: &RobotParams,
    gains: &ControllerGains,
    schedule: &GainSchedule,
) -> Result<GainSchedule> {
    if (schedule.gamma0 - scenario.operating_pitch).abs() <= OPERATING_PITCH_TOLERANCE {
        return Ok(schedule.clone());
    }
    log::info!(
        "relinearizing gain schedule at head pitch {} for {}",
        scenario.operating_pitch,
        scenario.name
    );
    build_gain_schedule_at(params, gains, schedule.grid.len(), scenario.operating_pitch)
}

pub fn run_scenario(
    scenario: &Scenario,
    params: &RobotParams,
    gains: &ControllerGains,
    schedule: &GainSchedule,
) -> Result<TrajectoryLog> {
    scenario.validate()?;
    params.validate()?;
    gains.validate()?;
    let schedule = schedule_for(scenario, params, gains, schedule)?;

    let plant = Plant::new(params, scenario.terrain.clone());
    let mut sensors = SensorModel::new(params, scenario.noise, scenario.seed);
    let mut estimator = Estimator::new(params, gains);
    let mut controller = MotionController::new(params, gains, schedule)?;

    let leg0 = scenario.reference(0.0, 0.0).leg_length_d;
    let mut state = FullPlantState::at_pitch(params, leg0, scenario.operating_pitch);
    state.ground = scenario.terrain.heights(0.0);

    let dt = gains.physics_dt;
    let substeps = gains.substeps();
    let ticks = (scenario.duration / gains.control_dt).round() as usize;
    let mut rows = Vec::with_capacity(ticks + 1);
    let mut accel = PlantAccel::default();
    let mut pending: Vec<_> = scenario.impulses.clone();
    pending.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut pending = pending.into_iter().peekable();
    let mut termination = None;

    for tick in 0..=ticks {
        let t = tick as f64 * gains.control_dt;
        let imu = sensors.imu(&state, &accel, t);
        let enc = sensors.encoders(&state, params);
        let est = estimator.update(&imu, &enc);
        let reference = scenario.reference(t, est.control.x);
        let out = controller.tick(&reference, &est);
        let cmd = out.mix.commands;
        accel = plant.accelerations(&state, &cmd);

        let legs = state.side_leg_lengths(params.track_width);
        let c = &out.mix.commands;
        rows.push(LogRow {
            t,
            gamma: state.gamma_world(),
            theta: state.theta_world(),
            x: state.x,
            gamma_dot: state.gamma_dot,
            theta_dot: state.theta_dot,
            x_dot: state.x_dot,
            leg_l: legs[0],
            leg_r: legs[1],
            psi: state.psi,
            yaw: state.yaw,
            split: state.split,
            slope: state.slope,
            gamma_hat: est.control.gamma,
            theta_hat: est.control.theta,
            x_hat: est.control.x,
            x_dot_hat: est.control.x_dot,
            psi_hat: est.psi,
            gamma_d: out.desired.gamma,
            theta_d: out.desired.theta,
            x_d: out.desired.x,
            v_d: out.desired.x_dot,
            split_d: reference.split_d,
            tau_hip_l: c.tau_hip_l,
            tau_hip_r: c.tau_hip_r,
            tau_knee_l: c.tau_knee_l,
            tau_knee_r: c.tau_knee_r,
            tau_wheel_l: c.tau_wheel_l,
            tau_wheel_r: c.tau_wheel_r,
            saturated: out.mix.saturated.iter().filter(|&&s| s).count() as u8,
            f_friction: accel.forces.f_f,
            f_normal: accel.forces.f_n,
        });
        if tick == ticks {
            break;
        }

        for sub in 0..substeps {
            let t_phys = t + sub as f64 * dt;
            while let Some(imp) = pending.next_if(|i| i.t < t_phys + 0.5 * dt) {
                state = plant.apply_impulse(&state, imp.impulse);
            }
            state = plant.step(&state, &cmd, dt);
            if let Some(kind) = state.termination {
                termination = Some(format!("{kind} at {:.3} s", t_phys + dt));
                break;
            }
        }
        if termination.is_some() {
            break;
        }
    }

    if let Some(note) = &termination {
        log::warn!("{}: {note}", scenario.name);
    }
    Ok(TrajectoryLog::new(&scenario.name, scenario.seed, rows, termination))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lqr::build_gain_schedule;
    use crate::sim::scenario::{Keyframe, PassCondition};
    use crate::sim::sensors::NoiseConfig;
    use crate::sim::plant::Terrain;

    fn standstill(duration: f64) -> Scenario {
        Scenario {
            name: "standstill".into(),
            duration,
            keyframes: vec![Keyframe::at(0.0)],
            split_frequency: 0.0,
            split_start: 0.0,
            impulses: vec![],
            terrain: Terrain::flat(),
            noise: NoiseConfig::off(),
            seed: 0,
            operating_pitch: 0.0,
            pass: PassCondition::Recovery { max_settling_time: 1.0 },
        }
    }

    #[test]
    fn standing_still_stays_balanced() {
        let p = RobotParams::default();
        let g = ControllerGains::default();
        let sched = build_gain_schedule(&p, &g, g.n_grid).unwrap();
        let log = run_scenario(&standstill(2.0), &p, &g, &sched).unwrap();
        assert_eq!(log.rows.len(), 1001);
        assert!(log.metrics.termination.is_none());
        let worst = log
            .rows
            .iter()
            .flat_map(|r| [r.gamma, r.theta, r.x, r.gamma_dot, r.theta_dot, r.x_dot, r.psi, r.yaw, r.split])
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst < 1e-6, "{worst}");
    }
}
