//! Discretization, discrete-time Riccati solution, LQR gains and the gain
//! schedule over leg length.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use crate::dynamics::{linearize_at, Matrix8, Matrix8x2};
use crate::error::{Error, Result};
use crate::params::{ControllerGains, RobotParams};

pub type Gain = SMatrix<f64, 2, 8>;

pub const DARE_MAX_ITERATIONS: usize = 100_000;
pub const DARE_TOLERANCE: f64 = 1e-9;
/// Every scheduled closed loop must have spectral radius below this.
pub const STABILITY_MARGIN: f64 = 1.0 - 1e-6;
pub const SCHEDULE_VERSION: u32 = 1;

/// Matrix exponential by Taylor series with scaling and squaring.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() <= f64::EPSILON * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Zero-order-hold discretization via the exponential of `[[A, B], [0, 0]] dt`.
pub fn discretize<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
    dt: f64,
) -> (SMatrix<f64, N, N>, SMatrix<f64, N, M>) {
    let mut aug = DMatrix::<f64>::zeros(N + M, N + M);
    aug.view_mut((0, 0), (N, N)).copy_from(&(a * dt));
    aug.view_mut((0, N), (N, M)).copy_from(&(b * dt));
    let e = expm(&aug);
    let ad = SMatrix::<f64, N, N>::from_fn(|i, j| e[(i, j)]);
    let bd = SMatrix::<f64, N, M>::from_fn(|i, j| e[(i, N + j)]);
    (ad, bd)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DareSolution<const N: usize> {
    pub p: SMatrix<f64, N, N>,
    pub iterations: usize,
    /// `||P - f(P)||_F` of the returned `P`.
    pub residual: f64,
}

fn riccati_step<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
    q: &SMatrix<f64, N, N>,
    r: &SMatrix<f64, M, M>,
    p: &SMatrix<f64, N, N>,
) -> Result<SMatrix<f64, N, N>> {
    let pa = p * a;
    let pb = p * b;
    let s = r + b.transpose() * pb;
    let s_inv_btpa = s
        .cholesky()
        .ok_or_else(|| Error::Synthesis("R + B'PB is not positive definite".into()))?
        .solve(&(b.transpose() * pa));
    let next = a.transpose() * pa - (a.transpose() * pb) * s_inv_btpa + q;
    Ok((next + next.transpose()) * 0.5)
}

/// Solves the DARE by the fixed-point recurrence
/// `P <- A'PA - A'PB (R + B'PB)^-1 B'PA + Q` started at `P = Q`.
pub fn solve_dare<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
    q: &SMatrix<f64, N, N>,
    r: &SMatrix<f64, M, M>,
) -> Result<DareSolution<N>> {
    // Scaled Frobenius norm; the plain one overflows near 1e154.
    let frobenius = |m: &SMatrix<f64, N, N>| {
        let scale = m.amax();
        if scale == 0.0 || !scale.is_finite() {
            scale
        } else {
            scale * (m / scale).norm()
        }
    };
    let mut p = (q + q.transpose()) * 0.5;
    let mut next = riccati_step(a, b, q, r, &p)?;
    let mut residual = frobenius(&(next - p));
    for iteration in 1..=DARE_MAX_ITERATIONS {
        p = next;
        next = riccati_step(a, b, q, r, &p)?;
        residual = frobenius(&(next - p));
        if !residual.is_finite() {
            break;
        }
        if residual <= DARE_TOLERANCE * (1.0 + frobenius(&p)) {
            return Ok(DareSolution { p, iterations: iteration, residual });
        }
    }
    Err(Error::NotConverged {
        iterations: DARE_MAX_ITERATIONS,
        residual,
    })
}

/// `K = (R + B'PB)^-1 B'PA`, for the law `u = -K x`.
pub fn lqr_gain<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
    r: &SMatrix<f64, M, M>,
    p: &SMatrix<f64, N, N>,
) -> Result<SMatrix<f64, M, N>> {
    let s = r + b.transpose() * p * b;
    s.cholesky()
        .map(|c| c.solve(&(b.transpose() * p * a)))
        .ok_or_else(|| Error::Synthesis("R + B'PB is not positive definite".into()))
}

pub fn spectral_radius<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    DMatrix::from_column_slice(N, N, m.as_slice())
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// One synthesized operating point.
#[derive(Clone, Debug)]
pub struct PointSynthesis {
    pub leg_length: f64,
    pub a_d: Matrix8,
    pub b_d: Matrix8x2,
    pub dare: DareSolution<8>,
    pub k: Gain,
    pub spectral_radius: f64,
}

pub fn synthesize_point(
    params: &RobotParams,
    gains: &ControllerGains,
    leg_length: f64,
    gamma0: f64,
) -> Result<PointSynthesis> {
    let lin = linearize_at(params, leg_length, gamma0)?;
    let (a_d, b_d) = discretize(&lin.a, &lin.b, gains.control_dt);
    let q = Matrix8::from_diagonal(&gains.q_diag.into());
    let r = SMatrix::<f64, 2, 2>::from_diagonal(&gains.r_diag.into());
    let dare = solve_dare(&a_d, &b_d, &q, &r)?;
    let k = lqr_gain(&a_d, &b_d, &r, &dare.p)?;
    let rho = spectral_radius(&(a_d - b_d * k));
    if !(rho < STABILITY_MARGIN) {
        return Err(Error::Synthesis(format!(
            "closed-loop spectral radius {rho} is not below {STABILITY_MARGIN}"
        )));
    }
    Ok(PointSynthesis {
        leg_length,
        a_d,
        b_d,
        dare,
        k,
        spectral_radius: rho,
    })
}

/// Balance gains tabulated over leg length.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSchedule {
    pub grid: Vec<f64>,
    pub gains: Vec<Gain>,
    pub dt: f64,
    /// Head pitch of the operating point the gains were synthesized about.
    pub gamma0: f64,
    pub q_diag: [f64; 8],
    pub r_diag: [f64; 2],
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Schedule about the upright equilibrium.
pub fn build_gain_schedule(
    params: &RobotParams,
    gains: &ControllerGains,
    n_grid: usize,
) -> Result<GainSchedule> {
    build_gain_schedule_at(params, gains, n_grid, 0.0)
}

/// Schedule about the equilibrium that holds the head at `gamma0`.
pub fn build_gain_schedule_at(
    params: &RobotParams,
    gains: &ControllerGains,
    n_grid: usize,
    gamma0: f64,
) -> Result<GainSchedule> {
    if n_grid < 2 {
        return Err(Error::validation("n_grid", "gain schedule needs at least 2 points"));
    }
    let grid = linspace(gains.leg_min, gains.leg_max, n_grid);
    let gains_out = grid
        .iter()
        .map(|&len| {
            synthesize_point(params, gains, len, gamma0)
                .map(|s| s.k)
                .map_err(|e| Error::ScheduleSynthesis {
                    leg_length: len,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainSchedule {
        grid,
        gains: gains_out,
        dt: gains.control_dt,
        gamma0,
        q_diag: gains.q_diag,
        r_diag: gains.r_diag,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    version: u32,
    dt: f64,
    gamma0: f64,
    q_diag: [f64; 8],
    r_diag: [f64; 2],
    grid: Vec<f64>,
    /// One row-major 2x8 gain per grid point.
    gains: Vec<Vec<f64>>,
}

/// Clamp warnings logged at `warn` before dropping to `debug`; a run that
/// leaves the span does so on every tick.
const CLAMP_WARNINGS: usize = 5;
static CLAMPS: AtomicUsize = AtomicUsize::new(0);

fn clamp_warning(leg_length: f64, edge: f64) {
    let n = CLAMPS.fetch_add(1, Ordering::Relaxed);
    if n < CLAMP_WARNINGS {
        log::warn!("leg length {leg_length} outside schedule span, clamping to {edge}");
        if n + 1 == CLAMP_WARNINGS {
            log::warn!("further clamp warnings logged at debug level");
        }
    } else {
        log::debug!("leg length {leg_length} outside schedule span, clamping to {edge}");
    }
}

impl GainSchedule {
    /// Entrywise linear interpolation; lengths outside the grid clamp to the
    /// nearest end point.
    pub fn lookup(&self, leg_length: f64) -> Gain {
        let first = self.grid[0];
        let last = self.grid[self.grid.len() - 1];
        if !(leg_length >= first) {
            clamp_warning(leg_length, first);
            return self.gains[0];
        }
        if leg_length >= last {
            if leg_length > last {
                clamp_warning(leg_length, last);
            }
            return self.gains[self.gains.len() - 1];
        }
        let hi = self.grid.partition_point(|&g| g <= leg_length);
        let lo = hi - 1;
        let t = (leg_length - self.grid[lo]) / (self.grid[hi] - self.grid[lo]);
        if t == 0.0 {
            return self.gains[lo];
        }
        self.gains[lo] * (1.0 - t) + self.gains[hi] * t
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 || self.grid.len() != self.gains.len() {
            return Err(Error::validation("grid", "needs >= 2 points, one gain per point"));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("grid", "must be strictly increasing"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::validation("dt", "must be > 0"));
        }
        if self.gains.iter().any(|k| k.iter().any(|v| !v.is_finite())) {
            return Err(Error::validation("gains", "must be finite"));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        let file = ScheduleFile {
            version: SCHEDULE_VERSION,
            dt: self.dt,
            gamma0: self.gamma0,
            q_diag: self.q_diag,
            r_diag: self.r_diag,
            grid: self.grid.clone(),
            gains: self
                .gains
                .iter()
                .map(|k| k.transpose().iter().copied().collect())
                .collect(),
        };
        toml::to_string(&file).expect("schedule always serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScheduleFile = toml::from_str(text).map_err(|e| Error::Config {
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        if file.version != SCHEDULE_VERSION {
            return Err(Error::validation(
                "version",
                format!("unsupported schedule version {}", file.version),
            ));
        }
        let gains = file
            .gains
            .iter()
            .map(|row| {
                if row.len() != 16 {
                    return Err(Error::validation("gains", "each gain needs 16 entries"));
                }
                Ok(Gain::from_row_slice(row))
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule = Self {
            grid: file.grid,
            gains,
            dt: file.dt,
            gamma0: file.gamma0,
            q_diag: file.q_diag,
            r_diag: file.r_diag,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_toml_string().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Yaw gain for the plant `I_yaw yaw'' = (w / R) dtau_w`, states
/// `[yaw error, yaw rate error]`.
pub fn yaw_gain(params: &RobotParams, gains: &ControllerGains) -> Result<SMatrix<f64, 1, 2>> {
    let a = SMatrix::<f64, 2, 2>::new(0.0, 1.0, 0.0, 0.0);
    let b = SMatrix::<f64, 2, 1>::new(0.0, params.track_width / (params.wheel_radius * params.i_yaw));
    let (a_d, b_d) = discretize(&a, &b, gains.control_dt);
    let q = SMatrix::<f64, 2, 2>::from_diagonal(&gains.q_yaw_diag.into());
    let r = SMatrix::<f64, 1, 1>::new(gains.r_yaw);
    let dare = solve_dare(&a_d, &b_d, &q, &r)?;
    lqr_gain(&a_d, &b_d, &r, &dare.p)
}
