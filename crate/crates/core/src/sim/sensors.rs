//! IMU and encoder synthesis from the plant state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::estimation::{quantize, EncoderSample, ImuSample};
use crate::params::RobotParams;
use crate::sim::plant::{FullPlantState, PlantAccel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// White noise on each gyro channel, rad/s.
    pub gyro_std: f64,
    /// White noise on each accelerometer channel, m/s^2.
    pub accel_std: f64,
    /// Constant offset on the roll and pitch rate channels, rad/s.
    pub gyro_bias: f64,
    /// IMU mounting error about the pitch axis, rad. Applied even with
    /// noise disabled.
    pub mount_pitch: f64,
    /// Round encoder readings to whole counts.
    pub quantize: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            gyro_std: 0.005,
            accel_std: 0.05,
            gyro_bias: 0.002,
            mount_pitch: 0.0,
            quantize: true,
        }
    }
}

impl NoiseConfig {
    /// Ideal sensors: no noise, no bias, no encoder quantization.
    pub fn off() -> Self {
        Self {
            enabled: false,
            quantize: false,
            ..Self::default()
        }
    }
}

/// Six independent channels: gyro roll / pitch / yaw then accel x / y / z.
/// Each draws from its own ChaCha stream so adding a channel never shifts
/// another's sequence.
#[derive(Clone, Debug)]
pub struct SensorModel {
    noise: NoiseConfig,
    rngs: [ChaCha8Rng; 6],
    wheel_radius: f64,
    track_width: f64,
    g: f64,
    encoder_step: f64,
}

impl SensorModel {
    pub fn new(params: &RobotParams, noise: NoiseConfig, seed: u64) -> Self {
        let rngs = std::array::from_fn(|channel| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(channel as u64);
            rng
        });
        Self {
            noise,
            rngs,
            wheel_radius: params.wheel_radius,
            track_width: params.track_width,
            g: params.g,
            encoder_step: params.encoder_step(),
        }
    }

    fn draw(&mut self, channel: usize, std: f64) -> f64 {
        if !self.noise.enabled || std == 0.0 {
            return 0.0;
        }
        // Finite positive std was checked by the caller's config.
        let dist = Normal::new(0.0, std).expect("noise std must be finite");
        dist.sample(&mut self.rngs[channel])
    }

    pub fn imu(&mut self, s: &FullPlantState, acc: &PlantAccel, t: f64) -> ImuSample {
        // Hip acceleration in the slope frame.
        let (st, ct) = s.theta.sin_cos();
        let (len, ld, td) = (s.leg_length, s.leg_rate, s.theta_dot);
        let a_x = acc.x_ddot + len * (ct * acc.theta_ddot - st * td * td)
            + acc.leg_accel * st
            + 2.0 * ld * td * ct;
        let a_z = -len * (st * acc.theta_ddot + ct * td * td) + acc.leg_accel * ct - 2.0 * ld * td * st;
        // Specific force: acceleration minus gravity, gravity rotated into
        // the slope frame.
        let (sa, ca) = s.slope.sin_cos();
        let f = [a_x + self.g * sa, a_z + self.g * ca];

        // Roll about the travel direction first, then pitch about the
        // rolled lateral axis; the estimator inverts the same composition.
        let (sp, cp) = s.psi.sin_cos();
        let (sg, cg) = (s.gamma + self.noise.mount_pitch).sin_cos();
        let f_y = f[1] * sp;
        let f_v = f[1] * cp;
        let f_x = f[0] * cg - f_v * sg;
        let f_z = f[0] * sg + f_v * cg;

        let bias = if self.noise.enabled { self.noise.gyro_bias } else { 0.0 };
        let (gs, as_) = (self.noise.gyro_std, self.noise.accel_std);
        let gyro = [
            s.psi_rate + bias + self.draw(0, gs),
            s.gamma_dot + bias + self.draw(1, gs),
            s.yaw_rate + self.draw(2, gs),
        ];
        let accel = [
            f_x + self.draw(3, as_),
            f_y + self.draw(4, as_),
            f_z + self.draw(5, as_),
        ];
        ImuSample {
            gyro,
            accel,
            timestamp: t,
        }
    }

    /// Quantized `[sigma1, sigma2, sigma3]` per side.
    pub fn encoders(&self, s: &FullPlantState, params: &RobotParams) -> EncoderSample {
        let gamma = s.gamma_world();
        let theta = s.theta_world();
        let theta_side = s.theta_side();
        let sigma2 = s.sigma2(params);
        let half_track = 0.5 * self.track_width * s.yaw;
        let x_side = [
            s.x + s.leg_length * (theta.sin() - theta_side[0].sin()) + half_track,
            s.x + s.leg_length * (theta.sin() - theta_side[1].sin()) - half_track,
        ];
        let mut sigma = [[0.0; 3]; 2];
        for i in 0..2 {
            let s1 = theta_side[i] - gamma - 0.5 * sigma2[i];
            let s3 = x_side[i] / self.wheel_radius - theta_side[i] - 0.5 * sigma2[i];
            sigma[i] = [s1, sigma2[i], s3];
            if self.noise.quantize {
                sigma[i] = sigma[i].map(|a| quantize(a, self.encoder_step));
            }
        }
        EncoderSample { sigma }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::accel_angles;

    #[test]
    fn static_imu_reads_gravity() {
        let p = RobotParams::default();
        let mut sensors = SensorModel::new(&p, NoiseConfig::off(), 0);
        let s = FullPlantState { gamma: 0.2, psi: -0.1, ..FullPlantState::upright(0.22) };
        let imu = sensors.imu(&s, &PlantAccel::default(), 0.0);
        let (pitch, roll) = accel_angles(&imu.accel);
        assert!((pitch - 0.2).abs() < 1e-12);
        assert!((roll + 0.1).abs() < 1e-12);
        let norm = imu.accel.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((norm - p.g).abs() < 1e-12);
    }

    #[test]
    fn slope_frame_reads_world_pitch() {
        let p = RobotParams::default();
        let mut sensors = SensorModel::new(&p, NoiseConfig::off(), 0);
        let s = FullPlantState { gamma: 0.1, slope: 0.1, ..FullPlantState::upright(0.22) };
        let (pitch, _) = accel_angles(&sensors.imu(&s, &PlantAccel::default(), 0.0).accel);
        assert!(pitch.abs() < 1e-12);
    }

    #[test]
    fn channels_are_independent_streams() {
        let p = RobotParams::default();
        let s = FullPlantState::upright(0.22);
        let mut a = SensorModel::new(&p, NoiseConfig::default(), 7);
        let mut b = SensorModel::new(&p, NoiseConfig::default(), 7);
        let ia = a.imu(&s, &PlantAccel::default(), 0.0);
        let ib = b.imu(&s, &PlantAccel::default(), 0.0);
        assert_eq!(ia, ib);
        assert_ne!(ia.gyro[0], ia.gyro[1]);
        let mut c = SensorModel::new(&p, NoiseConfig::default(), 8);
        assert_ne!(c.imu(&s, &PlantAccel::default(), 0.0), ia);
    }

    #[test]
    fn encoders_round_trip_through_kinematics() {
        let p = RobotParams::default();
        let sensors = SensorModel::new(&p, NoiseConfig { enabled: false, ..NoiseConfig::default() }, 0);
        let s = FullPlantState { gamma: 0.3, theta: -0.1, x: 0.4, ..FullPlantState::upright(0.2) };
        let enc = sensors.encoders(&s, &p);
        let q = p.encoder_step();
        for side in enc.sigma {
            let theta = s.gamma + side[0] + 0.5 * side[1];
            let x = p.wheel_radius * (theta + 0.5 * side[1] + side[2]);
            assert!((theta - s.theta).abs() <= 1.0 * q);
            assert!((x - s.x).abs() <= 1.5 * q * p.wheel_radius);
        }
    }
}
