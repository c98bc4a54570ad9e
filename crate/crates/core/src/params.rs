//! Physical and tuning parameters, and the TOML-based config loader.
//!
//! A config file holds two sections, `robot` and `gains`. Keys may be given
//! either as dotted keys (`robot.R = 0.0935`) or inside `[robot]` /
//! `[gains]` tables. Every key is optional; unspecified keys take the
//! defaults below. Unknown keys are rejected so that typos surface.
//!
//! Mass and inertia defaults are estimates: only the total mass (22.90 kg),
//! motor mass (2.6 kg), link lengths, wheel radius, stall torque and encoder
//! resolution are measured values.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the simplified robot model. Per-side quantities
/// (legs, wheels) describe one side; the planar model lumps both sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    /// Head (body) mass, kg.
    #[serde(rename = "m_H")]
    pub m_head: f64,
    /// Leg-linkage mass per side, kg.
    #[serde(rename = "m_L")]
    pub m_leg: f64,
    /// Wheel mass per side including the hub motor, kg.
    #[serde(rename = "m_w")]
    pub m_wheel: f64,
    /// Head pitch inertia about its CoM, kg m^2.
    #[serde(rename = "I_H")]
    pub i_head: f64,
    /// Per-side rod inertia about its own CoM at full leg extension, kg m^2.
    /// Scaled with the square of the current leg length.
    #[serde(rename = "I_L")]
    pub i_leg: f64,
    /// Wheel spin inertia per side, kg m^2.
    #[serde(rename = "I_w")]
    pub i_wheel: f64,
    /// Hip to head-CoM distance, m.
    pub l: f64,
    /// Head-CoM angle offset at equilibrium, rad.
    pub beta0: f64,
    /// Parallelogram link length (L2 = L3 = L4), m.
    #[serde(rename = "L_link")]
    pub link_length: f64,
    /// Hip offset link, m.
    #[serde(rename = "L1")]
    pub hip_offset: f64,
    /// Wheel radius, m.
    #[serde(rename = "R")]
    pub wheel_radius: f64,
    /// Rod CoM location measured from the hip, as a fraction of rod length.
    #[serde(rename = "L_w_frac")]
    pub rod_com_frac: f64,
    pub g: f64,
    /// Lateral wheel separation, m.
    pub track_width: f64,
    #[serde(rename = "I_yaw")]
    pub i_yaw: f64,
    /// Roll inertia about the wheel-contact line, kg m^2.
    #[serde(rename = "I_roll")]
    pub i_roll: f64,
    /// Per-motor torque saturation, N m.
    pub tau_max: f64,
    pub encoder_counts: u32,
    /// Knee travel limits, rad. `sigma2_min` bounds the extended leg.
    pub sigma2_min: f64,
    pub sigma2_max: f64,
}

// Head box dimensions used for the inertia estimates. Height is a guess.
const HEAD_LENGTH: f64 = 0.371;
const HEAD_WIDTH: f64 = 0.540;
const HEAD_HEIGHT: f64 = 0.10;

impl Default for RobotParams {
    fn default() -> Self {
        let m_head = 12.5;
        let m_leg = 1.8;
        let m_wheel = 3.4;
        let wheel_radius: f64 = 0.0935;
        let link_length: f64 = 0.140;
        let track_width = 0.48;
        let full_leg = 2.0 * link_length;
        let i_head = m_head * (HEAD_LENGTH.powi(2) + HEAD_HEIGHT.powi(2)) / 12.0;
        let half_track: f64 = 0.5 * track_width;
        let nominal_height: f64 = 0.25;
        Self {
            m_head,
            m_leg,
            m_wheel,
            i_head,
            i_leg: m_leg * full_leg.powi(2) / 12.0,
            i_wheel: 0.5 * m_wheel * wheel_radius.powi(2),
            l: 0.05,
            beta0: FRAC_PI_2,
            link_length,
            hip_offset: 0.090,
            wheel_radius,
            rod_com_frac: 0.5,
            g: 9.81,
            track_width,
            i_yaw: m_head * (HEAD_LENGTH.powi(2) + HEAD_WIDTH.powi(2)) / 12.0
                + 2.0 * (m_wheel + m_leg) * half_track.powi(2),
            i_roll: m_head * (HEAD_WIDTH.powi(2) + HEAD_HEIGHT.powi(2)) / 12.0
                + m_head * nominal_height.powi(2)
                + 2.0 * m_leg * (0.5 * nominal_height).powi(2),
            tau_max: 17.0,
            encoder_counts: 16384,
            sigma2_min: 0.1,
            sigma2_max: 2.6,
        }
    }
}

impl RobotParams {
    pub fn total_mass(&self) -> f64 {
        self.m_head + 2.0 * (self.m_leg + self.m_wheel)
    }

    /// Leg length with the knee straight.
    pub fn full_leg_length(&self) -> f64 {
        2.0 * self.link_length
    }

    /// Longest leg the knee travel allows.
    pub fn max_leg_length(&self) -> f64 {
        2.0 * self.link_length * (0.5 * self.sigma2_min).cos()
    }

    pub fn min_leg_length(&self) -> f64 {
        2.0 * self.link_length * (0.5 * self.sigma2_max).cos()
    }

    /// Angular size of one encoder count, rad.
    pub fn encoder_step(&self) -> f64 {
        std::f64::consts::TAU / self.encoder_counts as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive: [(&'static str, f64); 16] = [
            ("m_H", self.m_head),
            ("m_L", self.m_leg),
            ("m_w", self.m_wheel),
            ("I_H", self.i_head),
            ("I_L", self.i_leg),
            ("I_w", self.i_wheel),
            ("l", self.l),
            ("L_link", self.link_length),
            ("L1", self.hip_offset),
            ("R", self.wheel_radius),
            ("g", self.g),
            ("track_width", self.track_width),
            ("I_yaw", self.i_yaw),
            ("I_roll", self.i_roll),
            ("tau_max", self.tau_max),
            ("sigma2_min", self.sigma2_min),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(field, format!("must be positive, got {value}")));
            }
        }
        if !self.beta0.is_finite() {
            return Err(Error::validation("beta0", "must be finite"));
        }
        if !(self.rod_com_frac > 0.0 && self.rod_com_frac < 1.0) {
            return Err(Error::validation(
                "L_w_frac",
                format!("must lie in (0, 1), got {}", self.rod_com_frac),
            ));
        }
        if self.encoder_counts == 0 {
            return Err(Error::validation("encoder_counts", "must be nonzero"));
        }
        if !(self.sigma2_max > self.sigma2_min && self.sigma2_max < std::f64::consts::PI) {
            return Err(Error::validation(
                "sigma2_max",
                format!("must lie in (sigma2_min, pi), got {}", self.sigma2_max),
            ));
        }
        Ok(())
    }
}

/// Largest acceptable deviation per balance state, used to derive the
/// default state penalties by Bryson's rule (`Q_ii = 1 / d_i^2`).
/// Order: gamma, theta, x, gamma_dot, theta_dot, x_dot, int gamma, int x.
pub const BRYSON_STATE_DEVIATIONS: [f64; 8] = [0.02, 0.3, 0.1, 0.4, 3.0, 0.3, 0.01, 0.05];

/// Largest acceptable hip / wheel torque (lumped over both sides) for the
/// default input penalties.
pub const BRYSON_INPUT_LIMITS: [f64; 2] = [17.0, 10.0];

pub fn bryson_diag<const N: usize>(limits: &[f64; N]) -> [f64; N] {
    limits.map(|d| 1.0 / (d * d))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    #[serde(rename = "Q_diag")]
    pub q_diag: [f64; 8],
    #[serde(rename = "R_diag")]
    pub r_diag: [f64; 2],
    pub kp_height: f64,
    pub kd_height: f64,
    pub kp_roll: f64,
    pub kd_roll: f64,
    pub kp_split: f64,
    pub kd_split: f64,
    #[serde(rename = "Q_yaw_diag")]
    pub q_yaw_diag: [f64; 2],
    #[serde(rename = "R_yaw")]
    pub r_yaw: f64,
    pub control_dt: f64,
    pub physics_dt: f64,
    pub filter_alpha: f64,
    /// Number of leg lengths in the gain schedule.
    pub n_grid: usize,
    pub leg_min: f64,
    pub leg_max: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            q_diag: bryson_diag(&BRYSON_STATE_DEVIATIONS),
            r_diag: bryson_diag(&BRYSON_INPUT_LIMITS),
            kp_height: 2000.0,
            kd_height: 150.0,
            kp_roll: 40.0,
            kd_roll: 4.0,
            kp_split: 30.0,
            kd_split: 3.0,
            q_yaw_diag: bryson_diag(&[0.05, 0.5]),
            r_yaw: 1.0 / 17.0_f64.powi(2),
            control_dt: 0.002,
            physics_dt: 0.001,
            filter_alpha: 0.98,
            n_grid: 12,
            leg_min: 0.15,
            leg_max: 0.28,
        }
    }
}

impl ControllerGains {
    /// Physics steps per control tick.
    pub fn substeps(&self) -> usize {
        (self.control_dt / self.physics_dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_diag.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::validation("Q_diag", "entries must be finite and >= 0"));
        }
        if self.r_diag.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::validation("R_diag", "entries must be finite and > 0"));
        }
        if self.q_yaw_diag.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::validation("Q_yaw_diag", "entries must be finite and >= 0"));
        }
        if !(self.r_yaw.is_finite() && self.r_yaw > 0.0) {
            return Err(Error::validation("R_yaw", "must be > 0"));
        }
        let pd = [
            ("kp_height", self.kp_height),
            ("kd_height", self.kd_height),
            ("kp_roll", self.kp_roll),
            ("kd_roll", self.kd_roll),
            ("kp_split", self.kp_split),
            ("kd_split", self.kd_split),
        ];
        for (field, value) in pd {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::validation(field, format!("must be >= 0, got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.filter_alpha) {
            return Err(Error::validation(
                "filter_alpha",
                format!("must lie in [0, 1], got {}", self.filter_alpha),
            ));
        }
        if !(self.physics_dt.is_finite() && self.physics_dt > 0.0) {
            return Err(Error::validation("physics_dt", "must be > 0"));
        }
        if !(self.control_dt.is_finite() && self.control_dt >= self.physics_dt) {
            return Err(Error::validation("control_dt", "must be >= physics_dt"));
        }
        let ratio = self.control_dt / self.physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::validation(
                "control_dt",
                format!("must be an integer multiple of physics_dt (ratio {ratio})"),
            ));
        }
        if self.n_grid < 2 {
            return Err(Error::validation("n_grid", "gain schedule needs at least 2 points"));
        }
        if !(self.leg_min > 0.0 && self.leg_max > self.leg_min) {
            return Err(Error::validation("leg_max", "must exceed leg_min > 0"));
        }
        Ok(())
    }
}

/// Both parameter sets as they appear in a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub robot: RobotParams,
    pub gains: ControllerGains,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.gains.validate()?;
        if self.gains.leg_max > self.robot.full_leg_length() + 1e-12 {
            return Err(Error::validation(
                "leg_max",
                format!(
                    "exceeds the fully extended leg {} m",
                    self.robot.full_leg_length()
                ),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|span| text[..span.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::Config {
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("parameter structs always serialize")
    }
}

/// Loads and validates a config file. An empty file yields the defaults.
pub fn load_params(path: impl AsRef<Path>) -> Result<(RobotParams, ControllerGains)> {
    let text = std::fs::read_to_string(path)?;
    let config = Config::from_toml_str(&text)?;
    Ok((config.robot, config.gains))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let config = Config::from_toml_str("").unwrap();
        assert_eq!(config.robot.wheel_radius, 0.0935);
        assert_eq!(config.robot.encoder_counts, 16384);
        assert_eq!(config, Config::default());
    }

    #[test]
    fn default_masses_sum_to_total() {
        let p = RobotParams::default();
        assert!((p.total_mass() - 22.90).abs() < 1e-12);
    }

    #[test]
    fn negative_radius_is_rejected() {
        let err = Config::from_toml_str("robot.R = -1.0\n").unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "R"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn link_length_sets_full_leg() {
        let config = Config::from_toml_str("[robot]\nL_link = 0.14\n").unwrap();
        assert!((config.robot.full_leg_length() - 0.28).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = Config::from_toml_str("# comment\nrobot.R = 0.1\nrobot.radius = 2\n").unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = Config::from_toml_str("gains.kp_roll = 3\n\ngains.kd_roll = = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
    }

    #[test]
    fn gains_validation() {
        let mut g = ControllerGains::default();
        g.filter_alpha = 1.5;
        assert!(g.validate().is_err());
        let mut g = ControllerGains::default();
        g.control_dt = 0.0025;
        assert!(g.validate().is_err());
        let mut g = ControllerGains::default();
        g.r_diag[1] = 0.0;
        assert!(g.validate().is_err());
        let mut g = ControllerGains::default();
        g.n_grid = 1;
        assert!(g.validate().is_err());
        assert_eq!(ControllerGains::default().substeps(), 2);
    }
}
