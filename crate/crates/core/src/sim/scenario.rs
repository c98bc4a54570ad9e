//! Scripted scenarios: keyframed references, terrain, disturbances and the
//! pass conditions each one is judged by.

use std::f64::consts::TAU;

use crate::control::{ReferenceInput, NOMINAL_LEG_LENGTH};
use crate::error::{Error, Result};
use crate::sim::log::Metrics;
use crate::sim::plant::Terrain;
use crate::sim::sensors::NoiseConfig;

/// Reference values at one instant; linearly interpolated between frames
/// and held after the last one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keyframe {
    pub t: f64,
    pub velocity: f64,
    pub gamma_d: f64,
    pub leg_length: f64,
    pub yaw_rate: f64,
    /// Amplitude of the sinusoidal split-angle reference.
    pub split_amplitude: f64,
}

impl Keyframe {
    pub fn at(t: f64) -> Self {
        Self {
            t,
            velocity: 0.0,
            gamma_d: 0.0,
            leg_length: NOMINAL_LEG_LENGTH,
            yaw_rate: 0.0,
            split_amplitude: 0.0,
        }
    }

    pub fn velocity(self, v: f64) -> Self {
        Self { velocity: v, ..self }
    }

    pub fn gamma(self, g: f64) -> Self {
        Self { gamma_d: g, ..self }
    }

    pub fn split(self, a: f64) -> Self {
        Self { split_amplitude: a, ..self }
    }

    fn lerp(&self, other: &Self, s: f64) -> Self {
        let l = |a: f64, b: f64| a + (b - a) * s;
        Self {
            t: l(self.t, other.t),
            velocity: l(self.velocity, other.velocity),
            gamma_d: l(self.gamma_d, other.gamma_d),
            leg_length: l(self.leg_length, other.leg_length),
            yaw_rate: l(self.yaw_rate, other.yaw_rate),
            split_amplitude: l(self.split_amplitude, other.split_amplitude),
        }
    }
}

/// Horizontal push at the head CoM.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Impulse {
    pub t: f64,
    /// N s, positive forward.
    pub impulse: f64,
}

/// What a scenario is judged on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PassCondition {
    /// Bounds on head pitch and pendulum angle throughout.
    Tracking { max_gamma: f64, max_theta: f64 },
    /// Steady-state head-pitch error against a target and a hard gate, with
    /// the pendulum confined to a band.
    PitchHold { target_error: f64, gate_error: f64, theta_range: (f64, f64) },
    /// Peak-to-peak body roll.
    Roll { max_variation: f64 },
    /// Split amplitude reached while holding speed.
    Split { min_split: f64, max_rms_velocity_error: f64 },
    /// Back within the settling band before the end of the run.
    Recovery { max_settling_time: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub bound: Bound,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, measured: f64, threshold: f64) -> Self {
        Self { name, measured, bound: Bound::AtMost, threshold, passed: measured <= threshold }
    }

    fn at_least(name: &'static str, measured: f64, threshold: f64) -> Self {
        Self { name, measured, bound: Bound::AtLeast, threshold, passed: measured >= threshold }
    }

    /// `"max |theta| <= 0.5"`
    pub fn requirement(&self) -> String {
        let op = match self.bound {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        };
        format!("{} {op} {}", self.name, self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub checks: Vec<Check>,
    /// Set when the run ended early; always fails.
    pub terminated: Option<String>,
    /// Soft targets missed while the hard gates held.
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.terminated.is_none() && self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub keyframes: Vec<Keyframe>,
    pub split_frequency: f64,
    /// Split reference phase origin, s.
    pub split_start: f64,
    pub impulses: Vec<Impulse>,
    pub terrain: Terrain,
    pub noise: NoiseConfig,
    pub seed: u64,
    /// Head pitch the balance gains are linearized about; the run also
    /// starts at this operating point.
    pub operating_pitch: f64,
    pub pass: PassCondition,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Scenario(format!("{}: {m}", self.name)));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if self.keyframes.is_empty() {
            return bad("no keyframes");
        }
        if self.keyframes.windows(2).any(|w| !(w[1].t >= w[0].t)) {
            return bad("keyframe times must be non-decreasing");
        }
        if self.keyframes.iter().any(|k| k.leg_length <= 0.0 || !k.velocity.is_finite()) {
            return bad("keyframe values out of range");
        }
        if !self.operating_pitch.is_finite() || !self.split_frequency.is_finite() {
            return bad("non-finite parameter");
        }
        let n = self.noise;
        if [n.gyro_std, n.accel_std].iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("noise levels must be finite and non-negative");
        }
        Ok(())
    }

    fn frame(&self, t: f64) -> (Keyframe, f64) {
        let k = &self.keyframes;
        if t <= k[0].t {
            return (k[0], 0.0);
        }
        let i = k.partition_point(|f| f.t <= t);
        if i >= k.len() {
            return (k[k.len() - 1], 0.0);
        }
        let (a, b) = (&k[i - 1], &k[i]);
        let span = b.t - a.t;
        let s = if span > 0.0 { (t - a.t) / span } else { 1.0 };
        let leg_rate = if span > 0.0 { (b.leg_length - a.leg_length) / span } else { 0.0 };
        (a.lerp(b, s), leg_rate)
    }

    /// Operator reference at time `t`. `x_hat` is the estimated travelled
    /// distance, used to look up the terrain under each wheel.
    pub fn reference(&self, t: f64, x_hat: f64) -> ReferenceInput {
        let (f, leg_rate) = self.frame(t);
        let phase = TAU * self.split_frequency * (t - self.split_start);
        let (split_d, split_rate_d) = if t >= self.split_start && f.split_amplitude != 0.0 {
            (
                f.split_amplitude * phase.sin(),
                f.split_amplitude * TAU * self.split_frequency * phase.cos(),
            )
        } else {
            (0.0, 0.0)
        };
        let [gl, gr] = self.terrain.heights(x_hat);
        let mean = 0.5 * (gl + gr);
        ReferenceInput {
            gamma_d: f.gamma_d,
            velocity: f.velocity,
            x_d: None,
            yaw_rate_d: f.yaw_rate,
            psi_d: 0.0,
            leg_length_d: f.leg_length,
            leg_rate_d: leg_rate,
            leg_accel_d: 0.0,
            // A raised track needs a shorter leg on that side.
            leg_offset: [-(gl - mean), -(gr - mean)],
            split_d,
            split_rate_d,
        }
    }

    pub fn evaluate(&self, m: &Metrics) -> Verdict {
        let checks = match self.pass {
            PassCondition::Tracking { max_gamma, max_theta } => vec![
                Check::at_most("max |gamma|", m.max_abs_gamma, max_gamma),
                Check::at_most("max |theta|", m.max_abs_theta, max_theta),
            ],
            PassCondition::PitchHold { gate_error, theta_range, .. } => vec![
                Check::at_most("steady |gamma - gamma_d|", m.steady_pitch_error, gate_error),
                Check::at_least("min theta", m.min_theta, theta_range.0),
                Check::at_most("max theta", m.max_theta, theta_range.1),
            ],
            PassCondition::Roll { max_variation } => {
                vec![Check::at_most("roll variation", m.roll_variation, max_variation)]
            }
            PassCondition::Split { min_split, max_rms_velocity_error } => vec![
                Check::at_least("max |split|", m.max_abs_split, min_split),
                Check::at_most("rms velocity error", m.rms_velocity_error, max_rms_velocity_error),
            ],
            PassCondition::Recovery { max_settling_time } => {
                vec![Check::at_most("settling time", m.settling_time, max_settling_time)]
            }
        };
        let mut notes = Vec::new();
        if let PassCondition::PitchHold { target_error, .. } = self.pass {
            let verb = if m.steady_pitch_error > target_error { "misses" } else { "meets" };
            notes.push(format!(
                "steady pitch error {:.4} {verb} the {target_error} rad target",
                m.steady_pitch_error
            ));
        }
        Verdict {
            checks,
            terminated: m.termination.clone(),
            notes,
        }
    }
}

pub const SCENARIO_NAMES: [&str; 5] = [
    "flat_tracking",
    "pitch_hold",
    "slope_roll",
    "spacewalk",
    "step_disturbance",
];

fn base(name: &str, duration: f64, keyframes: Vec<Keyframe>, pass: PassCondition) -> Scenario {
    Scenario {
        name: name.to_string(),
        duration,
        keyframes,
        split_frequency: 0.0,
        split_start: 0.0,
        impulses: Vec::new(),
        terrain: Terrain::flat(),
        noise: NoiseConfig::default(),
        seed: 0,
        operating_pitch: 0.0,
        pass,
    }
}

/// Ramp of `height` on the right track starting at `x0`, climbed at
/// `angle`, held for `plateau` metres and descended symmetrically.
pub fn right_track_ramp(x0: f64, height: f64, angle: f64, plateau: f64) -> Terrain {
    let run = height / angle.tan();
    Terrain {
        left: Vec::new(),
        right: vec![
            (x0, 0.0),
            (x0 + run, height),
            (x0 + run + plateau, height),
            (x0 + 2.0 * run + plateau, 0.0),
        ],
    }
}

fn flat_tracking() -> Scenario {
    let mut s = base(
        "flat_tracking",
        10.0,
        vec![
            Keyframe::at(0.0),
            Keyframe::at(0.5),
            Keyframe::at(2.5).velocity(2.0),
            Keyframe::at(4.5).velocity(2.0),
            Keyframe::at(6.5),
        ],
        PassCondition::Tracking { max_gamma: 0.05, max_theta: 0.5 },
    );
    s.noise = NoiseConfig::off();
    s
}

fn pitch_hold() -> Scenario {
    let g = 1.0;
    let mut s = base(
        "pitch_hold",
        10.0,
        vec![
            Keyframe::at(0.0).gamma(g),
            Keyframe::at(1.0).gamma(g),
            Keyframe::at(3.0).gamma(g).velocity(2.0),
        ],
        PassCondition::PitchHold {
            target_error: 0.15,
            gate_error: 0.25,
            theta_range: (-0.5, 0.3),
        },
    );
    s.operating_pitch = g;
    s
}

fn slope_roll() -> Scenario {
    let mut s = base(
        "slope_roll",
        8.0,
        vec![
            Keyframe::at(0.0),
            Keyframe::at(0.5),
            Keyframe::at(1.5).velocity(0.5),
        ],
        PassCondition::Roll { max_variation: 0.1 },
    );
    s.terrain = right_track_ramp(1.0, 0.06, 0.523, 0.5);
    s
}

fn spacewalk() -> Scenario {
    let mut s = base(
        "spacewalk",
        8.0,
        vec![
            Keyframe::at(0.0),
            Keyframe::at(0.5),
            Keyframe::at(2.5).velocity(2.0),
            Keyframe::at(2.5).velocity(2.0).split(0.5),
        ],
        PassCondition::Split { min_split: 0.45, max_rms_velocity_error: 0.3 },
    );
    s.split_frequency = 0.5;
    s.split_start = 2.5;
    s
}

fn step_disturbance() -> Scenario {
    let mut s = base(
        "step_disturbance",
        6.0,
        vec![Keyframe::at(0.0)],
        PassCondition::Recovery { max_settling_time: 5.0 },
    );
    s.impulses.push(Impulse { t: 2.0, impulse: 5.0 });
    s
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![flat_tracking(), pitch_hold(), slope_roll(), spacewalk(), step_disturbance()]
}

pub fn scenario_by_name(name: &str) -> Result<Scenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario {
            name: name.to_string(),
            valid: SCENARIO_NAMES.join(", "),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_match_builtins() {
        let names: Vec<_> = builtin_scenarios().into_iter().map(|s| s.name).collect();
        assert_eq!(names, SCENARIO_NAMES);
        for s in builtin_scenarios() {
            s.validate().unwrap();
        }
        assert!(matches!(scenario_by_name("nope"), Err(Error::UnknownScenario { .. })));
    }

    #[test]
    fn keyframes_interpolate_and_hold() {
        let s = flat_tracking();
        assert_eq!(s.reference(0.2, 0.0).velocity, 0.0);
        assert!((s.reference(1.5, 0.0).velocity - 1.0).abs() < 1e-12);
        assert_eq!(s.reference(3.0, 0.0).velocity, 2.0);
        assert!((s.reference(5.5, 0.0).velocity - 1.0).abs() < 1e-12);
        assert_eq!(s.reference(9.0, 0.0).velocity, 0.0);
    }

    #[test]
    fn split_reference_starts_at_zero() {
        let s = spacewalk();
        assert_eq!(s.reference(2.4, 0.0).split_d, 0.0);
        assert!(s.reference(2.5, 0.0).split_d.abs() < 1e-12);
        assert!((s.reference(3.0, 0.0).split_d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn raised_track_shortens_that_leg() {
        let s = slope_roll();
        let r = s.reference(0.0, 1.5);
        assert!((r.leg_offset[1] + 0.03).abs() < 1e-12);
        assert!((r.leg_offset[0] - 0.03).abs() < 1e-12);
    }

    #[test]
    fn unordered_keyframes_rejected() {
        let mut s = flat_tracking();
        s.keyframes.swap(1, 3);
        assert!(matches!(s.validate(), Err(Error::Scenario(_))));
    }
}
