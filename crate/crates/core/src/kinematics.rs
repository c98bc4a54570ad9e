//! Joint-space to control-state transforms, leg geometry, and CoM positions.

use nalgebra::{SVector, Vector2};

use crate::error::{Error, Result};
use crate::params::RobotParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Motor-side coordinates of one leg. `sigma = [hip, knee, wheel]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointState {
    pub side: Side,
    /// Head pitch from the estimator.
    pub gamma: f64,
    pub sigma: [f64; 3],
    pub gamma_rate: f64,
    pub sigma_rate: [f64; 3],
}

impl JointState {
    pub fn zero(side: Side) -> Self {
        Self {
            side,
            gamma: 0.0,
            sigma: [0.0; 3],
            gamma_rate: 0.0,
            sigma_rate: [0.0; 3],
        }
    }
}

/// The eight balance states: pitch, pendulum angle, wheel position, their
/// rates, and the two integral states.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlState {
    pub gamma: f64,
    pub theta: f64,
    pub x: f64,
    pub gamma_dot: f64,
    pub theta_dot: f64,
    pub x_dot: f64,
    pub int_gamma: f64,
    pub int_x: f64,
}

impl ControlState {
    pub fn to_vector(&self) -> SVector<f64, 8> {
        SVector::<f64, 8>::from([
            self.gamma,
            self.theta,
            self.x,
            self.gamma_dot,
            self.theta_dot,
            self.x_dot,
            self.int_gamma,
            self.int_x,
        ])
    }

    pub fn from_vector(v: &SVector<f64, 8>) -> Self {
        Self {
            gamma: v[0],
            theta: v[1],
            x: v[2],
            gamma_dot: v[3],
            theta_dot: v[4],
            x_dot: v[5],
            int_gamma: v[6],
            int_x: v[7],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// `(gamma, theta, x)` from one leg's joint angles:
///
/// ```text
/// gamma = gamma
/// theta = gamma + sigma1 + sigma2 / 2
/// x     = R (gamma + sigma1 + sigma2 + sigma3)
/// ```
pub fn joint_to_control_state(joints: &JointState, wheel_radius: f64) -> (f64, f64, f64) {
    let [s1, s2, s3] = joints.sigma;
    let g = joints.gamma;
    (g, g + s1 + 0.5 * s2, wheel_radius * (g + s1 + s2 + s3))
}

/// Same map applied to rates.
pub fn joint_rates_to_control_rates(joints: &JointState, wheel_radius: f64) -> (f64, f64, f64) {
    let [s1, s2, s3] = joints.sigma_rate;
    let g = joints.gamma_rate;
    (g, g + s1 + 0.5 * s2, wheel_radius * (g + s1 + s2 + s3))
}

/// Inverse of [`joint_to_control_state`] for a given knee angle: the hip and
/// wheel motor angles that realize `(gamma, theta, x)`.
pub fn control_to_joint_angles(
    gamma: f64,
    theta: f64,
    x: f64,
    sigma2: f64,
    wheel_radius: f64,
) -> [f64; 3] {
    let sigma1 = theta - gamma - 0.5 * sigma2;
    let sigma3 = x / wheel_radius - theta - 0.5 * sigma2;
    [sigma1, sigma2, sigma3]
}

fn check_knee(sigma2: f64) -> Result<()> {
    if !sigma2.is_finite() || sigma2.abs() >= std::f64::consts::PI {
        return Err(Error::Domain(format!(
            "knee angle {sigma2} outside (-pi, pi)"
        )));
    }
    Ok(())
}

/// Straight-line hip-to-wheel length of the parallelogram leg.
pub fn leg_length(sigma2: f64, link_length: f64) -> Result<f64> {
    check_knee(sigma2)?;
    Ok(2.0 * link_length * (0.5 * sigma2).cos())
}

/// `dL/dsigma2`, the scalar knee Jacobian.
pub fn leg_jacobian(sigma2: f64, link_length: f64) -> f64 {
    -link_length * (0.5 * sigma2).sin()
}

/// Knee angle (>= 0) producing `length`. Lengths beyond full extension map
/// to a straight knee.
pub fn knee_for_length(length: f64, link_length: f64) -> f64 {
    let c = (length / (2.0 * link_length)).clamp(-1.0, 1.0);
    2.0 * c.acos()
}

pub fn robot_height(leg_length: f64, theta: f64) -> f64 {
    leg_length * theta.cos()
}

/// Head and rod CoM positions `(x, z)` relative to the wheel-center height.
/// `rod_length` is the current leg length.
pub fn com_positions(
    theta: f64,
    beta: f64,
    x: f64,
    rod_length: f64,
    params: &RobotParams,
) -> (Vector2<f64>, Vector2<f64>) {
    let l = params.l;
    let lm = rod_length * (1.0 - params.rod_com_frac);
    let head = Vector2::new(
        x + rod_length * theta.sin() + l * (beta + theta).cos(),
        rod_length * theta.cos() + l * (beta + theta).sin(),
    );
    let rod = Vector2::new(x + lm * theta.sin(), lm * theta.cos());
    (head, rod)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const R: f64 = 0.0935;

    fn joints(gamma: f64, sigma: [f64; 3]) -> JointState {
        JointState {
            gamma,
            sigma,
            ..JointState::zero(Side::Left)
        }
    }

    #[test]
    fn zero_joints() {
        assert_eq!(joint_to_control_state(&joints(0.0, [0.0; 3]), R), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hip_and_knee() {
        let (g, th, x) = joint_to_control_state(&joints(0.0, [0.1, 0.2, 0.0]), R);
        assert_eq!(g, 0.0);
        assert!((th - 0.2).abs() < 1e-15);
        assert!((x - 0.02805).abs() < 1e-15);
    }

    #[test]
    fn pitch_only() {
        let (g, th, x) = joint_to_control_state(&joints(0.05, [0.0; 3]), R);
        assert_eq!((g, th), (0.05, 0.05));
        assert!((x - 0.004675).abs() < 1e-15);
    }

    #[test]
    fn inverse_round_trip() {
        let s = control_to_joint_angles(0.3, -0.2, 1.7, 1.1, R);
        let (g, th, x) = joint_to_control_state(&joints(0.3, s), R);
        assert!((g - 0.3).abs() < 1e-14);
        assert!((th + 0.2).abs() < 1e-14);
        assert!((x - 1.7).abs() < 1e-14);
    }

    #[test]
    fn leg_length_cases() {
        assert!((leg_length(0.0, 0.14).unwrap() - 0.28).abs() < 1e-15);
        assert!((leg_length(FRAC_PI_2, 0.14).unwrap() - 0.197_989_898_732_233_3).abs() < 1e-12);
        assert!(leg_length(PI - 1e-9, 0.14).unwrap() < 1e-9);
        assert!(leg_length(PI, 0.14).is_err());
        assert!(leg_length(-3.5, 0.14).is_err());
    }

    #[test]
    fn leg_jacobian_matches_finite_difference() {
        for &s in &[0.1, 0.7, 1.3, 2.2, -0.9] {
            let h = 1e-6;
            let fd = (leg_length(s + h, 0.14).unwrap() - leg_length(s - h, 0.14).unwrap()) / (2.0 * h);
            assert!((fd - leg_jacobian(s, 0.14)).abs() < 1e-6);
        }
    }

    #[test]
    fn knee_inverse() {
        for &s in &[0.1, 0.9, 2.0] {
            let len = leg_length(s, 0.14).unwrap();
            assert!((knee_for_length(len, 0.14) - s).abs() < 1e-9);
        }
    }

    #[test]
    fn height_cases() {
        assert_eq!(robot_height(0.28, 0.0), 0.28);
        assert!(robot_height(0.28, FRAC_PI_2).abs() < 1e-16);
        assert!((robot_height(0.2, 0.523) - 0.2 * 0.523_f64.cos()).abs() < 1e-15);
        assert!((robot_height(0.2, 0.523) - 0.173_265).abs() < 1e-6);
    }

    #[test]
    fn com_cases() {
        let mut p = RobotParams::default();
        p.l = 0.0;
        let (head, _) = com_positions(0.0, FRAC_PI_2, 0.3, 0.28, &p);
        assert!((head - Vector2::new(0.3, 0.28)).norm() < 1e-15);

        p.l = 0.05;
        let (head, rod) = com_positions(0.0, FRAC_PI_2, 0.3, 0.28, &p);
        assert!((head - Vector2::new(0.3, 0.33)).norm() < 1e-15);
        assert!((rod - Vector2::new(0.3, 0.14)).norm() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_joints() -> impl Strategy<Value = JointState> {
            (-1.0..1.0f64, -2.0..2.0f64, -3.0..3.0f64, -50.0..50.0f64)
                .prop_map(|(g, a, b, c)| joints(g, [a, b, c]))
        }

        proptest! {
            #[test]
            fn superposition(a in arb_joints(), b in arb_joints()) {
                let sum = joints(a.gamma + b.gamma, [
                    a.sigma[0] + b.sigma[0],
                    a.sigma[1] + b.sigma[1],
                    a.sigma[2] + b.sigma[2],
                ]);
                let (ga, ta, xa) = joint_to_control_state(&a, R);
                let (gb, tb, xb) = joint_to_control_state(&b, R);
                let (gs, ts, xs) = joint_to_control_state(&sum, R);
                prop_assert!((gs - ga - gb).abs() < 1e-12);
                prop_assert!((ts - ta - tb).abs() < 1e-12);
                prop_assert!((xs - xa - xb).abs() < 1e-12);
            }

            #[test]
            fn leg_length_monotone(a in 0.0..3.1f64, b in 0.0..3.1f64) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(leg_length(lo, 0.14).unwrap() >= leg_length(hi, 0.14).unwrap());
                prop_assert!(leg_length(-lo, 0.14).unwrap() == leg_length(lo, 0.14).unwrap());
            }
        }
    }
}
