//! Control synthesis and simulation for a two-wheel bipedal balancing robot.
//!
//! The sagittal plane is modeled as a wheel, a variable-length rod standing
//! in for both legs, and a head that the hip motors can pitch independently.
//! On top of that model the crate synthesizes an LQR balance controller
//! (scheduled over leg length), the auxiliary height, roll, yaw and
//! split-angle loops, a complementary-filter state estimator, and a
//! deterministic fixed-step simulator with scripted scenarios.
//!
//! Sign conventions used throughout:
//!
//! * `x` points forward along the ground, `z` up.
//! * Pendulum angle `theta` and head pitch `gamma` are positive when tilting
//!   forward (toward `+x`). `gamma = 0` puts the head CoM directly above the
//!   hip.
//! * Roll `psi` is positive when the right side of the body is higher.
//! * Yaw is positive when turning right (clockwise seen from above).
//! * Knee angle `sigma2 >= 0` shortens the leg.

// `!(x > 0.0)` style checks are how NaN gets rejected alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Left/right loops index several parallel per-side arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod io;
pub mod kinematics;
pub mod lqr;
pub mod params;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
