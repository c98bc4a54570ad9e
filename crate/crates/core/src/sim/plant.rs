//! Nonlinear plant: the sagittal chain plus heave, roll, yaw and split axes.
//!
//! Sagittal coordinates are expressed in a frame aligned with the mean
//! ground slope `alpha` under the robot, so gravity enters rotated by
//! `alpha`. World-frame angles are `theta - alpha` and `gamma - alpha`.
//! When the slope under the robot changes, angles are re-expressed in the
//! new frame and the forward speed is projected onto the new ground line.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::Vector3;

use crate::control::MotorCommands;
use crate::dynamics::{ContactForces, PlanarPlantState, SagittalModel};
use crate::kinematics::{knee_for_length, leg_jacobian};
use crate::params::RobotParams;

/// Knee Jacobians are kept at least this far from zero when converting
/// knee torque to leg force.
pub const MIN_LEG_JACOBIAN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Fallen,
    Diverged,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Fallen => "fallen",
            Termination::Diverged => "diverged",
        })
    }
}

/// Ground height under each wheel track as piecewise-linear profiles of
/// the travelled distance. Empty profiles are flat at zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Terrain {
    pub left: Vec<(f64, f64)>,
    pub right: Vec<(f64, f64)>,
}

fn profile_at(profile: &[(f64, f64)], x: f64) -> (f64, f64) {
    // (height, slope dh/dx)
    match profile {
        [] => (0.0, 0.0),
        [(_, h)] => (*h, 0.0),
        _ => {
            if x <= profile[0].0 {
                return (profile[0].1, 0.0);
            }
            let last = profile[profile.len() - 1];
            if x >= last.0 {
                return (last.1, 0.0);
            }
            let i = profile.partition_point(|&(px, _)| px <= x);
            let (x0, h0) = profile[i - 1];
            let (x1, h1) = profile[i];
            if x1 == x0 {
                return (h1, 0.0);
            }
            let k = (h1 - h0) / (x1 - x0);
            (h0 + k * (x - x0), k)
        }
    }
}

impl Terrain {
    pub fn flat() -> Self {
        Self::default()
    }

    /// `[left, right]` ground heights.
    pub fn heights(&self, x: f64) -> [f64; 2] {
        [profile_at(&self.left, x).0, profile_at(&self.right, x).0]
    }

    /// Pitch of the line joining the two tracks' midpoints.
    pub fn mean_slope(&self, x: f64) -> f64 {
        let kl = profile_at(&self.left, x).1;
        let kr = profile_at(&self.right, x).1;
        (0.5 * (kl + kr)).atan()
    }

    pub fn is_flat(&self) -> bool {
        self.left.iter().chain(&self.right).all(|&(_, h)| h == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullPlantState {
    pub gamma: f64,
    pub theta: f64,
    pub x: f64,
    pub gamma_dot: f64,
    pub theta_dot: f64,
    pub x_dot: f64,
    /// Mean of the two leg lengths.
    pub leg_length: f64,
    pub leg_rate: f64,
    pub psi: f64,
    pub psi_rate: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    /// `theta_right - theta_left`.
    pub split: f64,
    pub split_rate: f64,
    /// Mean ground slope the sagittal frame is aligned with.
    pub slope: f64,
    /// `[left, right]` ground heights under the wheels.
    pub ground: [f64; 2],
    pub termination: Option<Termination>,
}

const N: usize = 14;

impl FullPlantState {
    pub fn upright(leg_length: f64) -> Self {
        Self {
            gamma: 0.0,
            theta: 0.0,
            x: 0.0,
            gamma_dot: 0.0,
            theta_dot: 0.0,
            x_dot: 0.0,
            leg_length,
            leg_rate: 0.0,
            psi: 0.0,
            psi_rate: 0.0,
            yaw: 0.0,
            yaw_rate: 0.0,
            split: 0.0,
            split_rate: 0.0,
            slope: 0.0,
            ground: [0.0; 2],
            termination: None,
        }
    }

    /// Static equilibrium with the head held at `gamma` on flat ground.
    pub fn at_pitch(params: &RobotParams, leg_length: f64, gamma: f64) -> Self {
        let model = SagittalModel::new_unchecked(params, leg_length);
        let theta = model.equilibrium(gamma).map(|op| op.theta).unwrap_or(0.0);
        Self {
            gamma,
            theta,
            ..Self::upright(leg_length)
        }
    }

    pub fn gamma_world(&self) -> f64 {
        self.gamma - self.slope
    }

    pub fn theta_world(&self) -> f64 {
        self.theta - self.slope
    }

    /// Per-side pendulum angles `[left, right]`, world frame.
    pub fn theta_side(&self) -> [f64; 2] {
        let t = self.theta_world();
        [t - 0.5 * self.split, t + 0.5 * self.split]
    }

    /// `[left, right]` leg lengths: the legs differ by the roll tilt minus
    /// the ground step between the tracks.
    pub fn side_leg_lengths(&self, track_width: f64) -> [f64; 2] {
        let d = track_width * self.psi.sin() - (self.ground[1] - self.ground[0]);
        [self.leg_length - 0.5 * d, self.leg_length + 0.5 * d]
    }

    pub fn sigma2(&self, params: &RobotParams) -> [f64; 2] {
        self.side_leg_lengths(params.track_width)
            .map(|l| knee_for_length(l, params.link_length))
    }

    pub fn planar(&self, beta0: f64) -> PlanarPlantState {
        let mut p = PlanarPlantState::from_generalized(
            &Vector3::new(self.gamma, self.theta, self.x),
            &Vector3::new(self.gamma_dot, self.theta_dot, self.x_dot),
            beta0,
            self.leg_length,
        );
        p.leg_rate = self.leg_rate;
        p
    }

    fn components(&self) -> [f64; N] {
        [
            self.gamma,
            self.theta,
            self.x,
            self.gamma_dot,
            self.theta_dot,
            self.x_dot,
            self.leg_length,
            self.leg_rate,
            self.psi,
            self.psi_rate,
            self.yaw,
            self.yaw_rate,
            self.split,
            self.split_rate,
        ]
    }

    fn with_array(&self, y: &[f64; N]) -> Self {
        Self {
            gamma: y[0],
            theta: y[1],
            x: y[2],
            gamma_dot: y[3],
            theta_dot: y[4],
            x_dot: y[5],
            leg_length: y[6],
            leg_rate: y[7],
            psi: y[8],
            psi_rate: y[9],
            yaw: y[10],
            yaw_rate: y[11],
            split: y[12],
            split_rate: y[13],
            ..*self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|v| v.is_finite())
    }
}

/// Accelerations of the sagittal chain and the contact forces that go with
/// them, for sensor synthesis and logging.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlantAccel {
    pub gamma_ddot: f64,
    pub theta_ddot: f64,
    pub x_ddot: f64,
    pub leg_accel: f64,
    pub forces: ContactForces,
}

#[derive(Clone, Debug)]
pub struct Plant {
    pub params: RobotParams,
    pub terrain: Terrain,
}

impl Plant {
    pub fn new(params: &RobotParams, terrain: Terrain) -> Self {
        Self {
            params: params.clone(),
            terrain,
        }
    }

    fn sagittal(&self, leg_length: f64, slope: f64) -> SagittalModel {
        let len = leg_length.clamp(1e-3, self.params.full_leg_length());
        SagittalModel::new_unchecked(&self.params, len).with_slope(slope)
    }

    /// Leg force along each rod produced by the knee torques.
    fn leg_forces(&self, s: &FullPlantState, cmd: &MotorCommands) -> [f64; 2] {
        let lens = s.side_leg_lengths(self.params.track_width);
        let knee = [cmd.tau_knee_l, cmd.tau_knee_r];
        let mut f = [0.0; 2];
        for i in 0..2 {
            let s2 = knee_for_length(lens[i], self.params.link_length);
            let j = leg_jacobian(s2, self.params.link_length).min(-MIN_LEG_JACOBIAN);
            f[i] = knee[i] / j;
        }
        f
    }

    fn derivative(&self, s: &FullPlantState, cmd: &MotorCommands) -> [f64; N] {
        let p = &self.params;
        let sag = self.sagittal(s.leg_length, s.slope);
        let tau_h = cmd.tau_hip_l + cmd.tau_hip_r;
        let tau_w = cmd.tau_wheel_l + cmd.tau_wheel_r;
        let q = Vector3::new(s.gamma, s.theta, s.x);
        let qd = Vector3::new(s.gamma_dot, s.theta_dot, s.x_dot);
        let qdd = sag.generalized_accel(&q, &qd, &[tau_h, tau_w]);

        let [f_l, f_r] = self.leg_forces(s, cmd);
        let theta_w = s.theta - s.slope;
        let leg_accel = (f_l + f_r) / p.m_head - p.g * theta_w.cos();

        let height = s.leg_length * theta_w.cos();
        let w = p.track_width;
        let psi_ddot = (p.total_mass() * p.g * height * s.psi.sin() + (f_r - f_l) * 0.5 * w) / p.i_roll;

        let wheel_diff = cmd.tau_wheel_r - cmd.tau_wheel_l;
        let yaw_ddot = w / (2.0 * p.wheel_radius) * wheel_diff / p.i_yaw;

        // Antisymmetric leg mode about a fixed hip: per-leg inertia about the
        // hip, with each wheel's rolling constraint folded in.
        let len = s.leg_length;
        let l_w = p.rod_com_frac * len;
        let scale = len / p.full_leg_length();
        let j_leg = p.i_leg * scale * scale
            + p.m_leg * l_w * l_w
            + (p.m_wheel + p.i_wheel / (p.wheel_radius * p.wheel_radius)) * len * len;
        let c3 = 2.0 * p.m_leg * (len - l_w) + p.m_head * len;
        let split_torque = 0.5 * (cmd.tau_hip_l - cmd.tau_hip_r)
            + (1.0 + len / p.wheel_radius) * 0.5 * wheel_diff
            + 0.5 * c3 * p.g * (0.5 * s.split).sin();
        let split_ddot = split_torque / (0.5 * j_leg);

        [
            s.gamma_dot,
            s.theta_dot,
            s.x_dot,
            qdd[0],
            qdd[1],
            qdd[2],
            s.leg_rate,
            leg_accel,
            s.psi_rate,
            psi_ddot,
            s.yaw_rate,
            yaw_ddot,
            s.split_rate,
            split_ddot,
        ]
    }

    pub fn accelerations(&self, s: &FullPlantState, cmd: &MotorCommands) -> PlantAccel {
        let d = self.derivative(s, cmd);
        let sag = self.sagittal(s.leg_length, s.slope);
        let q = Vector3::new(s.gamma, s.theta, s.x);
        let qd = Vector3::new(s.gamma_dot, s.theta_dot, s.x_dot);
        let qdd = Vector3::new(d[3], d[4], d[5]);
        PlantAccel {
            gamma_ddot: d[3],
            theta_ddot: d[4],
            x_ddot: d[5],
            leg_accel: d[7],
            forces: sag.contact_forces(&q, &qd, &qdd),
        }
    }

    /// Re-expresses the state in the frame of the slope under the wheels
    /// and refreshes the ground heights.
    fn follow_terrain(&self, s: &mut FullPlantState) {
        let slope = self.terrain.mean_slope(s.x);
        let delta = slope - s.slope;
        if delta != 0.0 {
            s.gamma += delta;
            s.theta += delta;
            s.x_dot *= delta.cos();
            s.slope = slope;
        }
        s.ground = self.terrain.heights(s.x);
    }

    /// One RK4 step with the commands held.
    pub fn step(&self, state: &FullPlantState, cmd: &MotorCommands, dt: f64) -> FullPlantState {
        if state.termination.is_some() {
            return *state;
        }
        if !state.is_finite() || !cmd.to_array().iter().all(|c| c.is_finite()) {
            return FullPlantState {
                termination: Some(Termination::Diverged),
                ..*state
            };
        }
        let mut s0 = *state;
        self.follow_terrain(&mut s0);
        let y0 = s0.components();
        let add = |k: &[f64; N], h: f64| {
            let mut y = y0;
            for i in 0..N {
                y[i] += h * k[i];
            }
            s0.with_array(&y)
        };
        let k1 = self.derivative(&s0, cmd);
        let k2 = self.derivative(&add(&k1, 0.5 * dt), cmd);
        let k3 = self.derivative(&add(&k2, 0.5 * dt), cmd);
        let k4 = self.derivative(&add(&k3, dt), cmd);
        let mut y = y0;
        for i in 0..N {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let mut out = s0.with_array(&y);

        let (lo, hi) = (self.params.min_leg_length(), self.params.max_leg_length());
        if out.leg_length < lo {
            out.leg_length = lo;
            out.leg_rate = out.leg_rate.max(0.0);
        } else if out.leg_length > hi {
            out.leg_length = hi;
            out.leg_rate = out.leg_rate.min(0.0);
        }

        if !out.is_finite() {
            out.termination = Some(Termination::Diverged);
        } else if out.theta_world().abs() >= FRAC_PI_2 {
            out.termination = Some(Termination::Fallen);
        }
        out
    }

    /// Applies a forward impulse (N s) at the head CoM.
    pub fn apply_impulse(&self, state: &FullPlantState, impulse: f64) -> FullPlantState {
        let sag = self.sagittal(state.leg_length, state.slope);
        let dq = sag.head_impulse(&Vector3::new(state.gamma, state.theta, state.x), impulse);
        FullPlantState {
            gamma_dot: state.gamma_dot + dq[0],
            theta_dot: state.theta_dot + dq[1],
            x_dot: state.x_dot + dq[2],
            ..*state
        }
    }
}

/// One RK4 step of the sagittal chain alone at frozen rod length.
pub fn planar_rk4_step(
    model: &SagittalModel,
    q: &Vector3<f64>,
    qd: &Vector3<f64>,
    u: &[f64; 2],
    dt: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let f = |q: &Vector3<f64>, qd: &Vector3<f64>| (*qd, model.generalized_accel(q, qd, u));
    let (k1q, k1v) = f(q, qd);
    let (k2q, k2v) = f(&(q + k1q * (0.5 * dt)), &(qd + k1v * (0.5 * dt)));
    let (k3q, k3v) = f(&(q + k2q * (0.5 * dt)), &(qd + k2v * (0.5 * dt)));
    let (k4q, k4v) = f(&(q + k3q * dt), &(qd + k3v * dt));
    (
        q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0),
        qd + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0),
    )
}

/// Relative energy drift of the passive sagittal chain released from
/// `(q0, 0)` and integrated for `duration` seconds.
pub fn passive_energy_drift(model: &SagittalModel, q0: &Vector3<f64>, dt: f64, duration: f64) -> f64 {
    let mut q = *q0;
    let mut qd = Vector3::zeros();
    let e0 = model.energy(&q, &qd);
    let steps = (duration / dt).round() as usize;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        (q, qd) = planar_rk4_step(model, &q, &qd, &[0.0, 0.0], dt);
        worst = worst.max((model.energy(&q, &qd) - e0).abs());
    }
    worst / e0.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Knee torques that hold the legs still at the given state.
    fn holding_knees(plant: &Plant, s: &FullPlantState) -> MotorCommands {
        let p = &plant.params;
        let lens = s.side_leg_lengths(p.track_width);
        let force = 0.5 * p.m_head * p.g * s.theta_world().cos();
        let knee = lens.map(|l| leg_jacobian(knee_for_length(l, p.link_length), p.link_length) * force);
        MotorCommands {
            tau_knee_l: knee[0],
            tau_knee_r: knee[1],
            ..Default::default()
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let p = RobotParams::default();
        let plant = Plant::new(&p, Terrain::flat());
        let s0 = FullPlantState::upright(0.22);
        let cmd = holding_knees(&plant, &s0);
        let mut s = s0;
        for _ in 0..1000 {
            s = plant.step(&s, &cmd, 1e-3);
        }
        assert!(s.termination.is_none());
        let d: f64 = s.components().iter().zip(s0.components()).map(|(a, b)| (a - b).abs()).sum();
        assert!(d < 1e-9, "{s:?}");
    }

    #[test]
    fn symmetric_commands_keep_yaw_and_roll_zero() {
        let p = RobotParams::default();
        let plant = Plant::new(&p, Terrain::flat());
        let mut s = FullPlantState::upright(0.22);
        let mut cmd = holding_knees(&plant, &s);
        cmd.tau_hip_l = 0.3;
        cmd.tau_hip_r = 0.3;
        cmd.tau_wheel_l = -0.2;
        cmd.tau_wheel_r = -0.2;
        for _ in 0..300 {
            s = plant.step(&s, &cmd, 1e-3);
        }
        assert!(s.theta != 0.0);
        assert_eq!((s.yaw, s.yaw_rate, s.psi, s.psi_rate, s.split), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn falls_without_control() {
        let p = RobotParams::default();
        let plant = Plant::new(&p, Terrain::flat());
        let mut s = FullPlantState { theta: 0.05, ..FullPlantState::upright(0.22) };
        let cmd = holding_knees(&plant, &s);
        for _ in 0..5000 {
            s = plant.step(&s, &cmd, 1e-3);
        }
        assert_eq!(s.termination, Some(Termination::Fallen));
    }

    #[test]
    fn non_finite_is_diverged() {
        let p = RobotParams::default();
        let plant = Plant::new(&p, Terrain::flat());
        let s = plant.step(&FullPlantState::upright(0.22), &MotorCommands { tau_hip_l: f64::NAN, ..Default::default() }, 1e-3);
        assert_eq!(s.termination, Some(Termination::Diverged));
    }

    /// Small-oscillation period of the sagittal chain hanging below the axle
    /// (gravity reversed), with the head CoM on the hip.
    #[test]
    fn hanging_pendulum_period() {
        let mut p = RobotParams::default();
        p.l = 1e-12;
        p.g = -9.81;
        let model = SagittalModel::new(&p, 0.22).unwrap();
        // Oracle: with the head decoupled, theta obeys
        // (M22 - M23^2 / M33) theta'' = c3 g theta.
        let m = model.mass_matrix(0.0, 0.0);
        let c3 = model.m_rod * model.l_m + model.m_head * model.rod_length;
        let omega = (c3 * 9.81 / (m[(1, 1)] - m[(1, 2)] * m[(1, 2)] / m[(2, 2)])).sqrt();
        let period = std::f64::consts::TAU / omega;

        let dt = 1e-4;
        let mut q = Vector3::new(0.0, 0.01, 0.0);
        let mut qd = Vector3::zeros();
        let mut t = 0.0;
        let mut crossings = Vec::new();
        let mut prev = q[1];
        while crossings.len() < 5 {
            (q, qd) = planar_rk4_step(&model, &q, &qd, &[0.0, 0.0], dt);
            t += dt;
            if prev > 0.0 && q[1] <= 0.0 {
                crossings.push(t - dt * q[1] / (q[1] - prev));
            }
            prev = q[1];
        }
        let measured = (crossings[4] - crossings[0]) / 4.0;
        assert!((measured - period).abs() / period < 0.01, "{measured} vs {period}");
    }

    #[test]
    fn rk4_order() {
        let p = RobotParams::default();
        let model = SagittalModel::new(&p, 0.22).unwrap();
        let run = |dt: f64| {
            let mut q = Vector3::new(0.05, 0.1, 0.0);
            let mut qd = Vector3::zeros();
            for _ in 0..(0.4 / dt).round() as usize {
                (q, qd) = planar_rk4_step(&model, &q, &qd, &[0.0, 0.0], dt);
            }
            q
        };
        let (a, b, c) = (run(4e-3), run(2e-3), run(1e-3));
        let ratio = (a - b).norm() / (b - c).norm();
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn energy_is_conserved() {
        let p = RobotParams::default();
        let model = SagittalModel::new(&p, 0.22).unwrap();
        let drift = passive_energy_drift(&model, &Vector3::new(0.1, 0.1, 0.0), 1e-3, 5.0);
        assert!(drift < 1e-6, "{drift}");
    }

    #[test]
    fn terrain_profile() {
        let t = Terrain {
            left: vec![],
            right: vec![(1.0, 0.0), (2.0, 0.5), (3.0, 0.5)],
        };
        assert_eq!(t.heights(0.5), [0.0, 0.0]);
        assert_eq!(t.heights(1.5), [0.0, 0.25]);
        assert_eq!(t.heights(9.0), [0.0, 0.5]);
        assert!((t.mean_slope(1.5) - 0.25f64.atan()).abs() < 1e-15);
        assert_eq!(t.mean_slope(2.5), 0.0);
        assert!(!t.is_flat());
    }

    #[test]
    fn impulse_pushes_forward() {
        let p = RobotParams::default();
        let plant = Plant::new(&p, Terrain::flat());
        let s = plant.apply_impulse(&FullPlantState::upright(0.22), 3.0);
        assert!(s.x_dot > 0.0 || s.theta_dot > 0.0);
    }
}
