//! Sagittal-plane dynamics of the wheel / rod / head chain.
//!
//! Generalized coordinates are `q = [gamma, theta, x]`: head pitch, rod
//! (pendulum) angle and wheel-center displacement. The absolute head
//! angle `beta` is related by `gamma = beta0 - beta - theta`, which makes the
//! head CoM sit at `x + L sin(theta) + l cos(beta + theta)` exactly as in the
//! CoM expressions of [`crate::kinematics::com_positions`].
//!
//! The planar model lumps both legs into one rod and both wheels into one
//! wheel, so leg and wheel masses and inertias enter twice. The rod length is
//! a frozen parameter of a [`SagittalModel`]; the simulator rebuilds the model
//! as the legs move.
//!
//! Equations of motion take the form `M(q) q'' + h(q, q') = S u` with
//! `u = [tau_H, tau_w]`. The hip motor applies `+tau_H` to the head and
//! `-tau_H` to the rod; the wheel motor applies `+tau_w` to the rod and
//! `-tau_w` to the wheel.

use nalgebra::{DMatrix, Matrix2x3, Matrix3, Matrix3x2, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};
use crate::params::RobotParams;

pub type Matrix8 = SMatrix<f64, 8, 8>;
pub type Matrix8x2 = SMatrix<f64, 8, 2>;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlanarPlantState {
    pub theta: f64,
    pub beta: f64,
    pub x: f64,
    pub theta_dot: f64,
    pub beta_dot: f64,
    pub x_dot: f64,
    pub leg_length: f64,
    pub leg_rate: f64,
}

impl PlanarPlantState {
    pub fn from_generalized(q: &Vector3<f64>, qd: &Vector3<f64>, beta0: f64, leg_length: f64) -> Self {
        Self {
            theta: q[1],
            beta: beta0 - q[0] - q[1],
            x: q[2],
            theta_dot: qd[1],
            beta_dot: -qd[0] - qd[1],
            x_dot: qd[2],
            leg_length,
            leg_rate: 0.0,
        }
    }

    pub fn gamma(&self, beta0: f64) -> f64 {
        beta0 - self.beta - self.theta
    }

    pub fn generalized(&self, beta0: f64) -> (Vector3<f64>, Vector3<f64>) {
        (
            Vector3::new(self.gamma(beta0), self.theta, self.x),
            Vector3::new(-self.beta_dot - self.theta_dot, self.theta_dot, self.x_dot),
        )
    }
}

/// Internal forces of the wheel / rod / head chain. `f_f`, `f_n` act on the
/// wheel at the ground; `(f_x2, f_z2)` act on the rod at the axle and
/// `(f_x1, f_z1)` on the head at the hip.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContactForces {
    pub f_f: f64,
    pub f_n: f64,
    pub f_x1: f64,
    pub f_z1: f64,
    pub f_x2: f64,
    pub f_z2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarAccel {
    pub theta_ddot: f64,
    pub beta_ddot: f64,
    pub x_ddot: f64,
    pub forces: ContactForces,
}

/// Lumped constants of the planar model at one rod length.
#[derive(Clone, Debug, PartialEq)]
pub struct SagittalModel {
    pub m_head: f64,
    pub m_rod: f64,
    pub m_wheel: f64,
    pub i_head: f64,
    pub i_rod: f64,
    pub i_wheel: f64,
    pub l: f64,
    pub rod_length: f64,
    /// Hip to rod CoM.
    pub l_w: f64,
    /// Wheel axle to rod CoM.
    pub l_m: f64,
    pub radius: f64,
    pub g: f64,
    /// Terrain pitch, rad; rotates gravity within the sagittal plane.
    pub slope: f64,
}

impl SagittalModel {
    pub fn new(params: &RobotParams, rod_length: f64) -> Result<Self> {
        let full = params.full_leg_length();
        if !(rod_length > 0.0 && rod_length <= full * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!(
                "rod length {rod_length} outside (0, {full}]"
            )));
        }
        Ok(Self::new_unchecked(params, rod_length))
    }

    pub(crate) fn new_unchecked(params: &RobotParams, rod_length: f64) -> Self {
        let scale = rod_length / params.full_leg_length();
        let l_w = params.rod_com_frac * rod_length;
        Self {
            m_head: params.m_head,
            m_rod: 2.0 * params.m_leg,
            m_wheel: 2.0 * params.m_wheel,
            i_head: params.i_head,
            i_rod: 2.0 * params.i_leg * scale * scale,
            i_wheel: 2.0 * params.i_wheel,
            l: params.l,
            rod_length,
            l_w,
            l_m: rod_length - l_w,
            radius: params.wheel_radius,
            g: params.g,
            slope: 0.0,
        }
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.slope = slope;
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.m_head + self.m_rod + self.m_wheel
    }

    /// First moment of rod plus head about the axle, `m_L L_M + m_H L`.
    fn rod_moment(&self) -> f64 {
        self.m_rod * self.l_m + self.m_head * self.rod_length
    }

    pub fn mass_matrix(&self, gamma: f64, theta: f64) -> Matrix3<f64> {
        let (mh, l, len) = (self.m_head, self.l, self.rod_length);
        let m11 = self.i_head + mh * l * l;
        let m12 = mh * len * l * (theta - gamma).cos();
        let m13 = mh * l * gamma.cos();
        let m22 = self.i_rod + self.m_rod * self.l_m * self.l_m + mh * len * len;
        let m23 = self.rod_moment() * theta.cos();
        let m33 = self.m_wheel + self.i_wheel / (self.radius * self.radius) + self.m_rod + mh;
        Matrix3::new(m11, m12, m13, m12, m22, m23, m13, m23, m33)
    }

    /// Gravity part of `h(q, q')`, i.e. the gradient of potential energy.
    pub fn gravity(&self, q: &Vector3<f64>) -> Vector3<f64> {
        let (gamma, theta) = (q[0], q[1]);
        let a = self.slope;
        Vector3::new(
            -self.m_head * self.g * self.l * (gamma - a).sin(),
            -self.rod_moment() * self.g * (theta - a).sin(),
            self.total_mass() * self.g * a.sin(),
        )
    }

    /// Coriolis / centripetal plus gravity terms.
    pub fn bias(&self, q: &Vector3<f64>, qd: &Vector3<f64>) -> Vector3<f64> {
        let (gamma, theta) = (q[0], q[1]);
        let (gd, td) = (qd[0], qd[1]);
        let c1 = self.m_head * self.rod_length * self.l;
        let s = (theta - gamma).sin();
        let coriolis = Vector3::new(
            -c1 * s * td * td,
            c1 * s * gd * gd,
            -self.m_head * self.l * gamma.sin() * gd * gd - self.rod_moment() * theta.sin() * td * td,
        );
        coriolis + self.gravity(q)
    }

    /// Maps `[tau_H, tau_w]` onto generalized forces.
    pub fn input_map(&self) -> Matrix3x2<f64> {
        Matrix3x2::new(1.0, 0.0, -1.0, 1.0, 0.0, -1.0 / self.radius)
    }

    pub fn generalized_accel(&self, q: &Vector3<f64>, qd: &Vector3<f64>, u: &[f64; 2]) -> Vector3<f64> {
        let m = self.mass_matrix(q[0], q[1]);
        let rhs = self.input_map() * nalgebra::Vector2::new(u[0], u[1]) - self.bias(q, qd);
        // M is symmetric positive definite for positive masses and inertias.
        m.cholesky()
            .expect("planar mass matrix must be positive definite")
            .solve(&rhs)
    }

    /// Head and rod CoM accelerations for given generalized motion.
    fn com_accelerations(
        &self,
        q: &Vector3<f64>,
        qd: &Vector3<f64>,
        qdd: &Vector3<f64>,
    ) -> ([f64; 2], [f64; 2]) {
        let (gamma, theta) = (q[0], q[1]);
        let (gd, td) = (qd[0], qd[1]);
        let (gdd, tdd, xdd) = (qdd[0], qdd[1], qdd[2]);
        let (st, ct) = theta.sin_cos();
        let (sg, cg) = gamma.sin_cos();
        let (len, l, lm) = (self.rod_length, self.l, self.l_m);
        let rod = [
            xdd + lm * (ct * tdd - st * td * td),
            -lm * (st * tdd + ct * td * td),
        ];
        let head = [
            xdd + len * (ct * tdd - st * td * td) + l * (cg * gdd - sg * gd * gd),
            -len * (st * tdd + ct * td * td) - l * (sg * gdd + cg * gd * gd),
        ];
        (head, rod)
    }

    /// Internal forces consistent with a given acceleration, recovered by
    /// walking the head, rod and wheel translational balances in turn.
    pub fn contact_forces(&self, q: &Vector3<f64>, qd: &Vector3<f64>, qdd: &Vector3<f64>) -> ContactForces {
        let (gx, gz) = (-self.g * self.slope.sin(), -self.g * self.slope.cos());
        let (head, rod) = self.com_accelerations(q, qd, qdd);
        let f_x1 = self.m_head * (head[0] - gx);
        let f_z1 = self.m_head * (head[1] - gz);
        let f_x2 = self.m_rod * (rod[0] - gx) + f_x1;
        let f_z2 = self.m_rod * (rod[1] - gz) + f_z1;
        let f_f = self.m_wheel * (qdd[2] - gx) + f_x2;
        let f_n = f_z2 - self.m_wheel * gz;
        ContactForces { f_f, f_n, f_x1, f_z1, f_x2, f_z2 }
    }

    /// Kinetic plus potential energy; potential datum at the axle.
    pub fn energy(&self, q: &Vector3<f64>, qd: &Vector3<f64>) -> f64 {
        let kinetic = 0.5 * qd.dot(&(self.mass_matrix(q[0], q[1]) * qd));
        let (gamma, theta, x) = (q[0], q[1], q[2]);
        let (sa, ca) = self.slope.sin_cos();
        let z_rod = self.l_m * theta.cos();
        let x_rod = x + self.l_m * theta.sin();
        let z_head = self.rod_length * theta.cos() + self.l * gamma.cos();
        let x_head = x + self.rod_length * theta.sin() + self.l * gamma.sin();
        let potential = self.g
            * (self.m_rod * (ca * z_rod + sa * x_rod)
                + self.m_head * (ca * z_head + sa * x_head)
                + self.m_wheel * sa * x);
        kinetic + potential
    }

    /// Jacobian of the head-CoM horizontal position w.r.t. `q`.
    pub fn head_x_jacobian(&self, q: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.l * q[0].cos(), self.rod_length * q[1].cos(), 1.0)
    }

    /// Velocity jump caused by a horizontal impulse (N s) at the head CoM.
    pub fn head_impulse(&self, q: &Vector3<f64>, impulse: f64) -> Vector3<f64> {
        let m = self.mass_matrix(q[0], q[1]);
        m.cholesky()
            .expect("planar mass matrix must be positive definite")
            .solve(&(self.head_x_jacobian(q) * impulse))
    }

    /// Static equilibrium holding the head at pitch `gamma` on flat ground.
    /// The rod leans so that the combined CoM stays over the axle.
    pub fn equilibrium(&self, gamma: f64) -> Result<OperatingPoint> {
        let sin_theta = -self.m_head * self.l * gamma.sin() / self.rod_moment();
        if sin_theta.abs() >= 1.0 {
            return Err(Error::Domain(format!(
                "no static equilibrium for head pitch {gamma}"
            )));
        }
        let tau_h = -self.m_head * self.g * self.l * gamma.sin();
        Ok(OperatingPoint {
            gamma,
            theta: sin_theta.asin(),
            tau_h,
            tau_w: 0.0,
        })
    }
}

/// Accelerations of the planar plant at frozen rod length on flat ground,
/// plus the internal forces that go with them.
pub fn nonlinear_accel(
    state: &PlanarPlantState,
    tau_h: f64,
    tau_w: f64,
    params: &RobotParams,
) -> Result<PlanarAccel> {
    let model = SagittalModel::new(params, state.leg_length)?;
    let (q, qd) = state.generalized(params.beta0);
    let qdd = model.generalized_accel(&q, &qd, &[tau_h, tau_w]);
    let forces = model.contact_forces(&q, &qd, &qdd);
    Ok(PlanarAccel {
        theta_ddot: qdd[1],
        beta_ddot: -qdd[0] - qdd[1],
        x_ddot: qdd[2],
        forces,
    })
}

/// Head pitch, rod angle and feed-forward torques of a static equilibrium.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OperatingPoint {
    pub gamma: f64,
    pub theta: f64,
    pub tau_h: f64,
    pub tau_w: f64,
}

/// Linearized model `a q'' + b q = c u` and its state-space form over
/// `X = [gamma, theta, x, gamma', theta', x', int gamma, int x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub a: Matrix8,
    pub b: Matrix8x2,
    pub c: Matrix8,
    pub mass: Matrix3<f64>,
    pub stiffness: Matrix3<f64>,
    pub input: Matrix3x2<f64>,
    pub leg_length: f64,
    pub operating_point: OperatingPoint,
}

/// Linearization about the upright equilibrium.
pub fn linearize(params: &RobotParams, leg_length: f64) -> Result<LinearModel> {
    linearize_at(params, leg_length, 0.0)
}

/// Linearization about the equilibrium that holds the head at `gamma0`.
pub fn linearize_at(params: &RobotParams, leg_length: f64, gamma0: f64) -> Result<LinearModel> {
    let model = SagittalModel::new(params, leg_length)?;
    let op = model.equilibrium(gamma0)?;
    let mass = model.mass_matrix(op.gamma, op.theta);
    // Velocity terms are quadratic and M'(q) multiplies a zero acceleration
    // at equilibrium, so only the gravity gradient survives.
    let stiffness = Matrix3::from_diagonal(&Vector3::new(
        -model.m_head * model.g * model.l * op.gamma.cos(),
        -model.rod_moment() * model.g * op.theta.cos(),
        0.0,
    ));
    let input = model.input_map();
    let mass_inv = mass
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular mass matrix".into()))?;

    let mut a = Matrix8::zeros();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-mass_inv * stiffness));
    a[(6, 0)] = 1.0;
    a[(7, 2)] = 1.0;

    let mut b = Matrix8x2::zeros();
    b.fixed_view_mut::<3, 2>(3, 0).copy_from(&(mass_inv * input));

    Ok(LinearModel {
        a,
        b,
        c: Matrix8::identity(),
        mass,
        stiffness,
        input,
        leg_length,
        operating_point: op,
    })
}

pub fn controllability_matrix(model: &LinearModel) -> SMatrix<f64, 8, 16> {
    let mut ctrb = SMatrix::<f64, 8, 16>::zeros();
    let mut block = model.b;
    for k in 0..8 {
        ctrb.fixed_view_mut::<8, 2>(0, 2 * k).copy_from(&block);
        block = model.a * block;
    }
    ctrb
}

/// Numerical rank: singular values at or below `RANK_TOLERANCE * sigma_max`
/// are treated as zero.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

/// Rank of the controllability matrix after alternately normalizing its
/// columns and rows. Scaling leaves the rank unchanged but the raw matrix
/// spans `B` to `A^7 B`, whose magnitudes differ by about eight decades.
pub fn controllability_rank(model: &LinearModel) -> usize {
    let c = controllability_matrix(model);
    let mut m = DMatrix::from_column_slice(8, 16, c.as_slice());
    for _ in 0..5 {
        for j in 0..m.ncols() {
            let n = m.column(j).norm();
            if n > 0.0 {
                m.column_mut(j).scale_mut(1.0 / n);
            }
        }
        for i in 0..m.nrows() {
            let n = m.row(i).norm();
            if n > 0.0 {
                m.row_mut(i).scale_mut(1.0 / n);
            }
        }
    }
    numerical_rank(&m)
}

/// Stacks `[q; q']` into the first six balance states.
pub fn planar_state_vector(q: &Vector3<f64>, qd: &Vector3<f64>) -> SVector<f64, 6> {
    SVector::<f64, 6>::from([q[0], q[1], q[2], qd[0], qd[1], qd[2]])
}

/// Direct solution of the wheel, rod and head Newton-Euler balances as one
/// 9x9 linear system in `[gamma'', theta'', x'', F_f, F_N, F_x1, F_z1, F_x2,
/// F_z2]`. Slower than the reduced form and kept as an independent route for
/// verification.
pub mod newton_euler {
    use nalgebra::{SMatrix, SVector, Vector3};

    use super::{ContactForces, SagittalModel};

    pub fn solve(
        model: &SagittalModel,
        q: &Vector3<f64>,
        qd: &Vector3<f64>,
        tau_h: f64,
        tau_w: f64,
    ) -> Option<(Vector3<f64>, ContactForces)> {
        let (gamma, theta) = (q[0], q[1]);
        let (gd, td) = (qd[0], qd[1]);
        let (st, ct) = theta.sin_cos();
        let (sg, cg) = gamma.sin_cos();
        let (mw, ml, mh) = (model.m_wheel, model.m_rod, model.m_head);
        let (len, lw, lm, l, r) = (model.rod_length, model.l_w, model.l_m, model.l, model.radius);
        let gx = -model.g * model.slope.sin();
        let gz = -model.g * model.slope.cos();

        // Columns: gdd tdd xdd Ff FN Fx1 Fz1 Fx2 Fz2
        const GDD: usize = 0;
        const TDD: usize = 1;
        const XDD: usize = 2;
        const FF: usize = 3;
        const FN: usize = 4;
        const FX1: usize = 5;
        const FZ1: usize = 6;
        const FX2: usize = 7;
        const FZ2: usize = 8;
        let mut a = SMatrix::<f64, 9, 9>::zeros();
        let mut rhs = SVector::<f64, 9>::zeros();

        // Wheel: translation along x and z, spin.
        a[(0, XDD)] = mw;
        a[(0, FF)] = -1.0;
        a[(0, FX2)] = 1.0;
        rhs[0] = mw * gx;

        a[(1, FN)] = 1.0;
        a[(1, FZ2)] = -1.0;
        rhs[1] = -mw * gz;

        a[(2, XDD)] = model.i_wheel / r;
        a[(2, FF)] = r;
        rhs[2] = -tau_w;

        // Rod.
        a[(3, XDD)] = ml;
        a[(3, TDD)] = ml * lm * ct;
        a[(3, FX2)] = -1.0;
        a[(3, FX1)] = 1.0;
        rhs[3] = ml * lm * st * td * td + ml * gx;

        a[(4, TDD)] = -ml * lm * st;
        a[(4, FZ2)] = -1.0;
        a[(4, FZ1)] = 1.0;
        rhs[4] = ml * lm * ct * td * td + ml * gz;

        a[(5, TDD)] = model.i_rod;
        a[(5, FZ1)] = -lw * st;
        a[(5, FX1)] = lw * ct;
        a[(5, FZ2)] = -lm * st;
        a[(5, FX2)] = lm * ct;
        rhs[5] = tau_w - tau_h;

        // Head.
        a[(6, XDD)] = mh;
        a[(6, TDD)] = mh * len * ct;
        a[(6, GDD)] = mh * l * cg;
        a[(6, FX1)] = -1.0;
        rhs[6] = mh * (len * st * td * td + l * sg * gd * gd) + mh * gx;

        a[(7, TDD)] = -mh * len * st;
        a[(7, GDD)] = -mh * l * sg;
        a[(7, FZ1)] = -1.0;
        rhs[7] = mh * (len * ct * td * td + l * cg * gd * gd) + mh * gz;

        a[(8, GDD)] = model.i_head;
        a[(8, FX1)] = l * cg;
        a[(8, FZ1)] = -l * sg;
        rhs[8] = tau_h;

        let sol = a.lu().solve(&rhs)?;
        let qdd = Vector3::new(sol[GDD], sol[TDD], sol[XDD]);
        let forces = ContactForces {
            f_f: sol[FF],
            f_n: sol[FN],
            f_x1: sol[FX1],
            f_z1: sol[FZ1],
            f_x2: sol[FX2],
            f_z2: sol[FZ2],
        };
        Some((qdd, forces))
    }
}

/// Columns of `x_dot` rows 3..6 of `A` and `B` for a given model: the
/// nonlinear plant's Jacobian by central differences around the operating
/// point. `h` is the perturbation size.
pub fn finite_difference_jacobian(
    params: &RobotParams,
    model: &LinearModel,
    h: f64,
) -> (SMatrix<f64, 3, 6>, Matrix2x3<f64>) {
    let sag = SagittalModel::new_unchecked(params, model.leg_length);
    let op = model.operating_point;
    let base_q = Vector3::new(op.gamma, op.theta, 0.0);
    let base_u = [op.tau_h, op.tau_w];
    let accel = |z: &SVector<f64, 6>, u: &[f64; 2]| {
        let q = base_q + Vector3::new(z[0], z[1], z[2]);
        let qd = Vector3::new(z[3], z[4], z[5]);
        sag.generalized_accel(&q, &qd, u)
    };
    let mut ja = SMatrix::<f64, 3, 6>::zeros();
    for j in 0..6 {
        let mut zp = SVector::<f64, 6>::zeros();
        let mut zm = SVector::<f64, 6>::zeros();
        zp[j] = h;
        zm[j] = -h;
        let col = (accel(&zp, &base_u) - accel(&zm, &base_u)) / (2.0 * h);
        ja.set_column(j, &col);
    }
    // Transposed input Jacobian (2x3), filled row by row.
    let mut jb_t = Matrix2x3::<f64>::zeros();
    let zero = SVector::<f64, 6>::zeros();
    for j in 0..2 {
        let mut up = base_u;
        let mut um = base_u;
        up[j] += h;
        um[j] -= h;
        let col = (accel(&zero, &up) - accel(&zero, &um)) / (2.0 * h);
        jb_t.set_row(j, &col.transpose());
    }
    (ja, jb_t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upright(leg_length: f64) -> PlanarPlantState {
        let p = RobotParams::default();
        PlanarPlantState {
            beta: p.beta0,
            leg_length,
            ..Default::default()
        }
    }

    #[test]
    fn equilibrium_is_exactly_at_rest() {
        let p = RobotParams::default();
        let acc = nonlinear_accel(&upright(0.25), 0.0, 0.0, &p).unwrap();
        assert_eq!(acc.theta_ddot, 0.0);
        assert_eq!(acc.beta_ddot, 0.0);
        assert_eq!(acc.x_ddot, 0.0);
        // At rest the ground carries the full weight.
        assert!((acc.forces.f_n - p.total_mass() * p.g).abs() < 1e-9);
    }

    #[test]
    fn rod_length_domain() {
        let p = RobotParams::default();
        assert!(nonlinear_accel(&upright(0.0), 0.0, 0.0, &p).is_err());
        assert!(nonlinear_accel(&upright(0.29), 0.0, 0.0, &p).is_err());
        assert!(linearize(&p, 0.3).is_err());
        assert!(linearize(&p, 0.28).is_ok());
    }

    #[test]
    fn reduces_to_printed_eom_without_head_offset() {
        // With the head CoM on the hip the mass and stiffness coefficients
        // collapse to the published linear equations of motion.
        let mut p = RobotParams::default();
        p.l = 1e-300;
        let lin = linearize(&p, 0.24).unwrap();
        let s = SagittalModel::new(&p, 0.24).unwrap();
        let (mh, ml, len, lw) = (s.m_head, s.m_rod, s.rod_length, s.l_w);
        let theta_theta = s.i_rod + len * len * mh + len * len * ml + lw * lw * ml - 2.0 * len * lw * ml;
        let theta_x = len * mh + len * ml - lw * ml;
        assert!((lin.mass[(1, 1)] - theta_theta).abs() < 1e-12);
        assert!((lin.mass[(1, 2)] - theta_x).abs() < 1e-12);
        assert!((lin.mass[(0, 0)] - s.i_head).abs() < 1e-12);
        assert!((lin.stiffness[(1, 1)] - (lw * ml * s.g - len * ml * s.g - len * mh * s.g)).abs() < 1e-12);
        assert!(
            (lin.mass[(2, 2)] - (mh + ml + s.m_wheel + s.i_wheel / (s.radius * s.radius))).abs() < 1e-12
        );
    }

    #[test]
    fn state_space_layout() {
        let p = RobotParams::default();
        let lin = linearize(&p, 0.25).unwrap();
        assert_eq!(lin.a.fixed_view::<3, 3>(0, 3).clone_owned(), Matrix3::identity());
        assert_eq!(lin.a.fixed_view::<3, 3>(0, 0).clone_owned(), Matrix3::zeros());
        assert!(lin.a.fixed_view::<3, 5>(3, 3).iter().all(|&v| v == 0.0));
        let mut row6 = [0.0; 8];
        row6[0] = 1.0;
        let mut row7 = [0.0; 8];
        row7[2] = 1.0;
        assert_eq!(lin.a.row(6).iter().copied().collect::<Vec<_>>(), row6);
        assert_eq!(lin.a.row(7).iter().copied().collect::<Vec<_>>(), row7);
        assert!(lin.b.fixed_view::<3, 2>(0, 0).iter().all(|&v| v == 0.0));
        assert!(lin.b.fixed_view::<2, 2>(6, 0).iter().all(|&v| v == 0.0));
        assert_eq!(lin.c, Matrix8::identity());
    }

    #[test]
    fn controllable_at_default() {
        let p = RobotParams::default();
        for len in [0.15, 0.18, 0.22, 0.25, 0.28] {
            assert_eq!(controllability_rank(&linearize(&p, len).unwrap()), 8, "L = {len}");
        }
        let lin = linearize(&p, 0.25).unwrap();
        let mut dead = lin.clone();
        dead.b = Matrix8x2::zeros();
        assert_eq!(controllability_rank(&dead), 0);
    }

    fn small_angle_gap(theta: f64) -> f64 {
        let p = RobotParams::default();
        let lin = linearize(&p, 0.25).unwrap();
        let mut s = upright(0.25);
        s.theta = theta;
        s.beta = p.beta0 - theta; // gamma stays 0
        let acc = nonlinear_accel(&s, 0.0, 0.0, &p).unwrap();
        let mut x = SVector::<f64, 8>::zeros();
        x[1] = theta;
        let lin_acc = lin.a * x;
        let gamma_ddot = -acc.beta_ddot - acc.theta_ddot;
        Vector3::new(gamma_ddot, acc.theta_ddot, acc.x_ddot)
            .iter()
            .zip(lin_acc.rows(3, 3).iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn small_angle_matches_linear_model() {
        // The neglected terms are cubic in theta; at 0.01 rad the
        // inertia-coupling cosines leave a gap of about 1.7e-4 rad/s^2.
        assert!(small_angle_gap(0.01) < 2e-4);
        assert!(small_angle_gap(0.005) < 1e-4);
        let ratio = small_angle_gap(0.01) / small_angle_gap(0.005);
        assert!((ratio - 8.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn pitched_equilibrium_holds() {
        let p = RobotParams::default();
        let model = SagittalModel::new(&p, 0.22).unwrap();
        let op = model.equilibrium(1.0).unwrap();
        assert!(op.theta < 0.0);
        let q = Vector3::new(op.gamma, op.theta, 0.0);
        let qdd = model.generalized_accel(&q, &Vector3::zeros(), &[op.tau_h, op.tau_w]);
        assert!(qdd.norm() < 1e-12, "{qdd}");
    }

    #[test]
    fn impulse_moves_head_forward() {
        let p = RobotParams::default();
        let model = SagittalModel::new(&p, 0.25).unwrap();
        let q = Vector3::zeros();
        let dq = model.head_impulse(&q, 2.0);
        // Momentum bookkeeping: J^T dq equals P / effective mass > 0.
        assert!(model.head_x_jacobian(&q).dot(&dq) > 0.0);
    }

    #[test]
    fn newton_euler_agrees_at_a_fixed_state() {
        let p = RobotParams::default();
        let model = SagittalModel::new(&p, 0.21).unwrap().with_slope(0.1);
        let q = Vector3::new(0.3, -0.2, 1.0);
        let qd = Vector3::new(0.5, -1.5, 0.8);
        let qdd = model.generalized_accel(&q, &qd, &[2.0, -3.0]);
        let (qdd_ne, forces) = newton_euler::solve(&model, &q, &qd, 2.0, -3.0).unwrap();
        assert!((qdd - qdd_ne).norm() < 1e-10 * qdd.norm());
        let f = model.contact_forces(&q, &qd, &qdd);
        assert!((f.f_n - forces.f_n).abs() < 1e-9);
        assert!((f.f_f - forces.f_f).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mirror_symmetry(
                g in -0.5..0.5f64, t in -0.8..0.8f64, x in -2.0..2.0f64,
                gd in -3.0..3.0f64, td in -3.0..3.0f64, xd in -3.0..3.0f64,
                th in -10.0..10.0f64, tw in -10.0..10.0f64,
            ) {
                let p = RobotParams::default();
                let model = SagittalModel::new(&p, 0.23).unwrap();
                let q = Vector3::new(g, t, x);
                let qd = Vector3::new(gd, td, xd);
                let a = model.generalized_accel(&q, &qd, &[th, tw]);
                let b = model.generalized_accel(&-q, &-qd, &[-th, -tw]);
                prop_assert!((a + b).norm() <= 1e-9 * (1.0 + a.norm()));
            }
        }
    }
}
