//! Balance, height, roll, yaw and split-angle loops and the torque mixer.

use nalgebra::{SMatrix, SVector};

use crate::dynamics::SagittalModel;
use crate::error::Result;
use crate::estimation::StateEstimate;
use crate::kinematics::{leg_jacobian, ControlState};
use crate::lqr::{yaw_gain, Gain, GainSchedule};
use crate::params::{ControllerGains, RobotParams};

/// Operator targets for one control tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceInput {
    pub gamma_d: f64,
    /// Commanded forward speed, integrated into the position target.
    pub velocity: f64,
    /// Absolute position target; overrides the integrated one when set.
    pub x_d: Option<f64>,
    pub yaw_rate_d: f64,
    pub psi_d: f64,
    pub leg_length_d: f64,
    pub leg_rate_d: f64,
    pub leg_accel_d: f64,
    /// Per-side leg length offsets `[left, right]`, e.g. for uneven ground.
    pub leg_offset: [f64; 2],
    pub split_d: f64,
    pub split_rate_d: f64,
}

impl Default for ReferenceInput {
    fn default() -> Self {
        Self {
            gamma_d: 0.0,
            velocity: 0.0,
            x_d: None,
            yaw_rate_d: 0.0,
            psi_d: 0.0,
            leg_length_d: NOMINAL_LEG_LENGTH,
            leg_rate_d: 0.0,
            leg_accel_d: 0.0,
            leg_offset: [0.0; 2],
            split_d: 0.0,
            split_rate_d: 0.0,
        }
    }
}

impl ReferenceInput {
    pub fn is_finite(&self) -> bool {
        [
            self.gamma_d,
            self.velocity,
            self.x_d.unwrap_or(0.0),
            self.yaw_rate_d,
            self.psi_d,
            self.leg_length_d,
            self.leg_rate_d,
            self.leg_accel_d,
            self.leg_offset[0],
            self.leg_offset[1],
            self.split_d,
            self.split_rate_d,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub const NOMINAL_LEG_LENGTH: f64 = 0.22;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MotorCommands {
    pub tau_hip_l: f64,
    pub tau_hip_r: f64,
    pub tau_knee_l: f64,
    pub tau_knee_r: f64,
    pub tau_wheel_l: f64,
    pub tau_wheel_r: f64,
}

impl MotorCommands {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.tau_hip_l,
            self.tau_hip_r,
            self.tau_knee_l,
            self.tau_knee_r,
            self.tau_wheel_l,
            self.tau_wheel_r,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            tau_hip_l: a[0],
            tau_hip_r: a[1],
            tau_knee_l: a[2],
            tau_knee_r: a[3],
            tau_wheel_l: a[4],
            tau_wheel_r: a[5],
        }
    }
}

/// `u = K (X_d - X)`, returning `(tau_H, tau_w)`.
pub fn balance_control(k: &Gain, x_d: &ControlState, x: &ControlState) -> (f64, f64) {
    let u = k * (x_d.to_vector() - x.to_vector());
    (u[0], u[1])
}

/// Desired leg length and its first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegTarget {
    pub length: f64,
    pub rate: f64,
    pub accel: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeightOutput {
    pub tau_knee: f64,
    /// The knee is straight, so no torque can change the leg length.
    pub degenerate: bool,
}

/// `tau_knee = J (dF + m_H g)` with
/// `dF = L''_d + kp (L_d - L) + kd (L'_d - L')` and `J = dL/dsigma2`.
pub fn height_control(
    target: &LegTarget,
    leg_length: f64,
    leg_rate: f64,
    sigma2: f64,
    params: &RobotParams,
    gains: &ControllerGains,
) -> HeightOutput {
    let df = target.accel
        + gains.kp_height * (target.length - leg_length)
        + gains.kd_height * (target.rate - leg_rate);
    let j = leg_jacobian(sigma2, params.link_length);
    HeightOutput {
        tau_knee: j * (df + params.m_head * params.g),
        degenerate: j == 0.0,
    }
}

pub fn roll_control(
    psi_d: f64,
    psi_dot_d: f64,
    psi_hat: f64,
    psi_dot_hat: f64,
    gains: &ControllerGains,
) -> f64 {
    gains.kp_roll * (psi_d - psi_hat) + gains.kd_roll * (psi_dot_d - psi_dot_hat)
}

pub fn yaw_control(k_yaw: &SMatrix<f64, 1, 2>, yaw_err: f64, yaw_rate_err: f64) -> f64 {
    (k_yaw * SVector::<f64, 2>::new(yaw_err, yaw_rate_err))[0]
}

pub fn split_angle_control(
    split_d: f64,
    split_rate_d: f64,
    delta_theta: f64,
    delta_theta_dot: f64,
    gains: &ControllerGains,
) -> f64 {
    gains.kp_split * (split_d - delta_theta) + gains.kd_split * (split_rate_d - delta_theta_dot)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MixOutput {
    pub commands: MotorCommands,
    /// Per channel, in [`MotorCommands::to_array`] order.
    pub saturated: [bool; 6],
}

impl MixOutput {
    pub fn wheel_saturated(&self) -> bool {
        self.saturated[4] || self.saturated[5]
    }
}

/// Superposes the loop outputs onto the six motors and clamps each to
/// `+-tau_max`. Left hip and left knee take `+`; the right wheel takes `+`.
pub fn mix_and_saturate(
    balance: (f64, f64),
    tau_knee: [f64; 2],
    d_roll: f64,
    d_yaw: f64,
    d_split: f64,
    tau_max: f64,
) -> MixOutput {
    let (tau_h, tau_w) = balance;
    let raw = [
        0.5 * tau_h + d_split,
        0.5 * tau_h - d_split,
        tau_knee[0] + d_roll,
        tau_knee[1] - d_roll,
        0.5 * tau_w - d_yaw,
        0.5 * tau_w + d_yaw,
    ];
    let mut saturated = [false; 6];
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = raw[i].clamp(-tau_max, tau_max);
        saturated[i] = raw[i].abs() > tau_max;
    }
    MixOutput {
        commands: MotorCommands::from_array(out),
        saturated,
    }
}

/// Everything one controller tick produced, for logging.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlOutput {
    pub mix: MixOutput,
    pub tau_h: f64,
    pub tau_w: f64,
    pub tau_knee: [f64; 2],
    pub d_roll: f64,
    pub d_yaw: f64,
    pub d_split: f64,
    /// Balance target `X_d` used this tick.
    pub desired: ControlState,
    /// Balance state `X` fed to the gain, with the controller's integrals.
    pub feedback: ControlState,
    pub yaw_d: f64,
    pub degenerate_leg: bool,
}

/// The complete motion controller: one instance per robot, ticked at the
/// control rate.
#[derive(Clone, Debug)]
pub struct MotionController {
    params: RobotParams,
    gains: ControllerGains,
    schedule: GainSchedule,
    k_yaw: SMatrix<f64, 1, 2>,
    x_d: Option<f64>,
    yaw_d: f64,
    int_gamma: f64,
    int_x: f64,
    hold_integrators: bool,
}

impl MotionController {
    pub fn new(params: &RobotParams, gains: &ControllerGains, schedule: GainSchedule) -> Result<Self> {
        Ok(Self {
            params: params.clone(),
            gains: gains.clone(),
            k_yaw: yaw_gain(params, gains)?,
            schedule,
            x_d: None,
            yaw_d: 0.0,
            int_gamma: 0.0,
            int_x: 0.0,
            hold_integrators: false,
        })
    }

    pub fn schedule(&self) -> &GainSchedule {
        &self.schedule
    }

    /// Clears integral states and position / heading targets.
    pub fn reset(&mut self) {
        self.x_d = None;
        self.yaw_d = 0.0;
        self.int_gamma = 0.0;
        self.int_x = 0.0;
        self.hold_integrators = false;
    }

    pub fn tick(&mut self, r: &ReferenceInput, est: &StateEstimate) -> ControlOutput {
        let dt = self.gains.control_dt;
        let s = &est.control;
        let leg_mean = 0.5 * (est.leg_length[0] + est.leg_length[1]);

        let x_d = match r.x_d {
            Some(x) => x,
            None => self.x_d.map_or(s.x, |x| x + r.velocity * dt),
        };
        self.x_d = Some(x_d);
        self.yaw_d += r.yaw_rate_d * dt;

        let sag = SagittalModel::new_unchecked(
            &self.params,
            leg_mean.clamp(1e-3, self.params.full_leg_length()),
        );
        // Head pitch beyond the static range falls back to the upright lean.
        let eq = sag.equilibrium(r.gamma_d).unwrap_or_default();

        if !self.hold_integrators {
            self.int_gamma += (s.gamma - r.gamma_d) * dt;
            self.int_x += (s.x - x_d) * dt;
        }

        let desired = ControlState {
            gamma: r.gamma_d,
            theta: eq.theta,
            x: x_d,
            x_dot: r.velocity,
            ..Default::default()
        };
        let feedback = ControlState {
            int_gamma: self.int_gamma,
            int_x: self.int_x,
            ..*s
        };
        let k = self.schedule.lookup(leg_mean);
        let (fb_h, fb_w) = balance_control(&k, &desired, &feedback);
        let tau_h = eq.tau_h + fb_h;
        let tau_w = eq.tau_w + fb_w;

        let mut tau_knee = [0.0; 2];
        let mut degenerate = false;
        let (lo, hi) = (self.params.min_leg_length(), self.params.max_leg_length());
        for side in 0..2 {
            let target = LegTarget {
                length: (r.leg_length_d + r.leg_offset[side]).clamp(lo, hi),
                rate: r.leg_rate_d,
                accel: r.leg_accel_d,
            };
            let h = height_control(
                &target,
                est.leg_length[side],
                est.leg_rate[side],
                est.sigma2[side],
                &self.params,
                &self.gains,
            );
            // Each leg carries half of the head.
            tau_knee[side] = 0.5 * h.tau_knee;
            degenerate |= h.degenerate;
        }

        let d_roll = roll_control(r.psi_d, 0.0, est.psi, est.psi_rate, &self.gains);
        let d_yaw = yaw_control(&self.k_yaw, self.yaw_d - est.yaw, r.yaw_rate_d - est.yaw_rate);
        let d_split = split_angle_control(r.split_d, r.split_rate_d, est.split, est.split_rate, &self.gains);

        let mix = mix_and_saturate((tau_h, tau_w), tau_knee, d_roll, d_yaw, d_split, self.params.tau_max);
        self.hold_integrators = mix.wheel_saturated();

        ControlOutput {
            mix,
            tau_h,
            tau_w,
            tau_knee,
            d_roll,
            d_yaw,
            d_split,
            desired,
            feedback,
            yaw_d: self.yaw_d,
            degenerate_leg: degenerate,
        }
    }
}
