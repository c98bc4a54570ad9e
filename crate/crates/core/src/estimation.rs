//! Complementary-filter attitude estimation and assembly of the balance
//! state from IMU and encoder readings.
//!
//! The IMU sits on the head at the hip. Gyro channels are
//! `[roll rate, pitch rate, yaw rate]` in the crate's sign conventions;
//! accelerometer channels are the specific force along body
//! `[forward, right, up]`.

use std::f64::consts::{PI, TAU};

use crate::kinematics::{
    joint_rates_to_control_rates, joint_to_control_state, leg_jacobian, leg_length, ControlState,
    JointState, Side,
};
use crate::params::{ControllerGains, RobotParams};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ImuSample {
    pub gyro: [f64; 3],
    pub accel: [f64; 3],
    pub timestamp: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AttitudeEstimate {
    pub gamma: f64,
    pub psi: f64,
    pub gamma_rate: f64,
    pub psi_rate: f64,
    /// Gyro bias estimate `[pitch, roll]`, rad/s.
    pub gyro_bias: [f64; 2],
    /// The last sample's accelerometer reading was rejected.
    pub accel_rejected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    /// Weight of the gyro-propagated angle.
    pub alpha: f64,
    /// Bias adaptation rate, 1/s. Zero disables bias tracking.
    pub bias_gain: f64,
    pub g: f64,
}

impl FilterConfig {
    pub fn new(alpha: f64, g: f64) -> Self {
        Self { alpha, bias_gain: DEFAULT_BIAS_GAIN, g }
    }
}

pub const DEFAULT_BIAS_GAIN: f64 = 0.5;
/// Cutoff of the encoder-rate low-pass filter.
pub const RATE_CUTOFF_HZ: f64 = 50.0;
/// Cutoff applied to the differentiated hip velocity before it is removed
/// from the accelerometer reading.
pub const HIP_ACCEL_CUTOFF_HZ: f64 = 10.0;

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// `(pitch, roll)` of the gravity direction seen in a specific-force sample.
pub fn accel_angles(accel: &[f64; 3]) -> (f64, f64) {
    let [fx, fy, fz] = *accel;
    (-fx.atan2(fz), fy.atan2(fx.hypot(fz)))
}

fn accel_usable(accel: &[f64; 3], g: f64) -> bool {
    let n = (accel[0] * accel[0] + accel[1] * accel[1] + accel[2] * accel[2]).sqrt();
    n >= 0.5 * g && n <= 1.5 * g
}

/// One filter step per axis:
/// `angle = pred + (1 - alpha) (accel_angle - pred)` with
/// `pred = prev + (gyro - bias) dt`. The bias adapts against the same
/// innovation. Samples whose accelerometer magnitude is outside
/// `[0.5 g, 1.5 g]` propagate the gyro only.
pub fn complementary_update(
    prev: &AttitudeEstimate,
    imu: &ImuSample,
    dt: f64,
    cfg: &FilterConfig,
) -> AttitudeEstimate {
    let pitch_rate = imu.gyro[1] - prev.gyro_bias[0];
    let roll_rate = imu.gyro[0] - prev.gyro_bias[1];
    let pred_pitch = prev.gamma + pitch_rate * dt;
    let pred_roll = prev.psi + roll_rate * dt;
    let mut out = AttitudeEstimate {
        gamma: pred_pitch,
        psi: pred_roll,
        gamma_rate: pitch_rate,
        psi_rate: roll_rate,
        gyro_bias: prev.gyro_bias,
        accel_rejected: false,
    };
    if !accel_usable(&imu.accel, cfg.g) {
        out.accel_rejected = true;
    } else {
        let (acc_pitch, acc_roll) = accel_angles(&imu.accel);
        let blend = 1.0 - cfg.alpha;
        let e_pitch = wrap_angle(acc_pitch - pred_pitch);
        let e_roll = wrap_angle(acc_roll - pred_roll);
        out.gamma = pred_pitch + blend * e_pitch;
        out.psi = pred_roll + blend * e_roll;
        out.gyro_bias[0] -= cfg.bias_gain * blend * e_pitch;
        out.gyro_bias[1] -= cfg.bias_gain * blend * e_roll;
    }
    out.gamma = wrap_angle(out.gamma);
    out.psi = wrap_angle(out.psi);
    out
}

/// Rounds to the nearest encoder count.
pub fn quantize(angle: f64, step: f64) -> f64 {
    (angle / step).round() * step
}

/// Balance state from the attitude and both legs' joints: side-averaged
/// `theta` and `x` with `gamma` taken from the attitude estimate, integrals
/// by the trapezoidal rule.
pub fn assemble_state(
    att: &AttitudeEstimate,
    joints: &[JointState; 2],
    prev: &ControlState,
    dt: f64,
    wheel_radius: f64,
) -> ControlState {
    let mut theta = 0.0;
    let mut x = 0.0;
    let mut theta_dot = 0.0;
    let mut x_dot = 0.0;
    for j in joints {
        let j = JointState {
            gamma: att.gamma,
            gamma_rate: att.gamma_rate,
            ..*j
        };
        let (_, th, xx) = joint_to_control_state(&j, wheel_radius);
        let (_, thd, xd) = joint_rates_to_control_rates(&j, wheel_radius);
        theta += 0.5 * th;
        x += 0.5 * xx;
        theta_dot += 0.5 * thd;
        x_dot += 0.5 * xd;
    }
    ControlState {
        gamma: att.gamma,
        theta,
        x,
        gamma_dot: att.gamma_rate,
        theta_dot,
        x_dot,
        int_gamma: prev.int_gamma + 0.5 * (prev.gamma + att.gamma) * dt,
        int_x: prev.int_x + 0.5 * (prev.x + x) * dt,
    }
}

/// Quantized joint angles `[hip, knee, wheel]` of both legs `[left, right]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EncoderSample {
    pub sigma: [[f64; 3]; 2],
}

/// Everything the controllers need from the sensors.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateEstimate {
    pub control: ControlState,
    pub psi: f64,
    pub psi_rate: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub leg_length: [f64; 2],
    pub leg_rate: [f64; 2],
    pub sigma2: [f64; 2],
    /// Per-side pendulum angles `[left, right]`.
    pub theta_side: [f64; 2],
    /// `theta_right - theta_left`.
    pub split: f64,
    pub split_rate: f64,
    pub accel_rejected: bool,
}

fn low_pass_coefficient(cutoff_hz: f64, dt: f64) -> f64 {
    let tau = 1.0 / (TAU * cutoff_hz);
    dt / (tau + dt)
}

/// Stateful estimator: one instance per robot, updated once per control
/// tick.
#[derive(Clone, Debug)]
pub struct Estimator {
    wheel_radius: f64,
    link_length: f64,
    cfg: FilterConfig,
    compensate_accel: bool,
    dt: f64,
    att: AttitudeEstimate,
    control: ControlState,
    prev_sigma: Option<[[f64; 3]; 2]>,
    sigma_rate: [[f64; 3]; 2],
    yaw: f64,
    hip_velocity: Option<f64>,
    hip_accel: f64,
}

impl Estimator {
    pub fn new(params: &RobotParams, gains: &ControllerGains) -> Self {
        Self {
            wheel_radius: params.wheel_radius,
            link_length: params.link_length,
            cfg: FilterConfig::new(gains.filter_alpha, params.g),
            compensate_accel: true,
            dt: gains.control_dt,
            att: AttitudeEstimate::default(),
            control: ControlState::default(),
            prev_sigma: None,
            sigma_rate: [[0.0; 3]; 2],
            yaw: 0.0,
            hip_velocity: None,
            hip_accel: 0.0,
        }
    }

    pub fn with_filter(mut self, cfg: FilterConfig) -> Self {
        self.cfg = cfg;
        self
    }

    /// Removes the estimated hip acceleration from accelerometer samples.
    pub fn with_accel_compensation(mut self, on: bool) -> Self {
        self.compensate_accel = on;
        self
    }

    pub fn attitude(&self) -> &AttitudeEstimate {
        &self.att
    }

    /// Zeroes the integral states.
    pub fn reset_integrals(&mut self) {
        self.control.int_gamma = 0.0;
        self.control.int_x = 0.0;
    }

    pub fn update(&mut self, imu: &ImuSample, enc: &EncoderSample) -> StateEstimate {
        let dt = self.dt;
        let first = self.prev_sigma.is_none();

        if first {
            // Start from the accelerometer's gravity direction.
            let (pitch, roll) = accel_angles(&imu.accel);
            self.att = AttitudeEstimate {
                gamma: pitch,
                psi: roll,
                gamma_rate: imu.gyro[1],
                psi_rate: imu.gyro[0],
                ..Default::default()
            };
        } else {
            let mut sample = *imu;
            if self.compensate_accel {
                let (s, c) = self.att.gamma.sin_cos();
                sample.accel[0] -= self.hip_accel * c;
                sample.accel[2] -= self.hip_accel * s;
            }
            self.att = complementary_update(&self.att, &sample, dt, &self.cfg);
        }

        let a = low_pass_coefficient(RATE_CUTOFF_HZ, dt);
        if let Some(prev) = self.prev_sigma {
            for side in 0..2 {
                for k in 0..3 {
                    let raw = (enc.sigma[side][k] - prev[side][k]) / dt;
                    self.sigma_rate[side][k] += a * (raw - self.sigma_rate[side][k]);
                }
            }
        }
        self.prev_sigma = Some(enc.sigma);

        let joints = [Side::Left, Side::Right].map(|side| {
            let i = side as usize;
            JointState {
                side,
                gamma: self.att.gamma,
                sigma: enc.sigma[i],
                gamma_rate: self.att.gamma_rate,
                sigma_rate: self.sigma_rate[i],
            }
        });
        let prev = if first { ControlState::default() } else { self.control };
        let mut control = assemble_state(&self.att, &joints, &prev, dt, self.wheel_radius);
        if first {
            control.int_gamma = 0.0;
            control.int_x = 0.0;
        }
        self.control = control;

        let mut leg = [0.0; 2];
        let mut leg_rate = [0.0; 2];
        let mut sigma2 = [0.0; 2];
        let mut theta_side = [0.0; 2];
        for i in 0..2 {
            let s2 = enc.sigma[i][1].clamp(0.0, PI - 1e-9);
            sigma2[i] = s2;
            leg[i] = leg_length(s2, self.link_length).unwrap_or(0.0);
            leg_rate[i] = leg_jacobian(s2, self.link_length) * self.sigma_rate[i][1];
            theta_side[i] = self.att.gamma + enc.sigma[i][0] + 0.5 * enc.sigma[i][1];
        }
        let split_rate = (self.sigma_rate[1][0] + 0.5 * self.sigma_rate[1][1])
            - (self.sigma_rate[0][0] + 0.5 * self.sigma_rate[0][1]);

        if !first {
            self.yaw += imu.gyro[2] * dt;
        }

        // Hip horizontal velocity for the next accelerometer correction.
        let mean_leg = 0.5 * (leg[0] + leg[1]);
        let v_hip = control.x_dot + mean_leg * control.theta.cos() * control.theta_dot;
        if let Some(v_prev) = self.hip_velocity {
            let raw = (v_hip - v_prev) / dt;
            let b = low_pass_coefficient(HIP_ACCEL_CUTOFF_HZ, dt);
            self.hip_accel += b * (raw - self.hip_accel);
        }
        self.hip_velocity = Some(v_hip);

        StateEstimate {
            control,
            psi: self.att.psi,
            psi_rate: self.att.psi_rate,
            yaw: self.yaw,
            yaw_rate: imu.gyro[2],
            leg_length: leg,
            leg_rate,
            sigma2,
            theta_side,
            split: theta_side[1] - theta_side[0],
            split_rate,
            accel_rejected: self.att.accel_rejected,
        }
    }
}
