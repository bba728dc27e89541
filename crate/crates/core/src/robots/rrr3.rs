//! 3-RRR spherical manipulator with a ZYX Euler-angle task space.
//!
//! Each leg `i` has an actuated proximal link turning about the fixed axis `û_i`, a
//! passive joint axis `ŵ_i` at its far end, and a distal link joining `ŵ_i` to the
//! platform axis `v̂_i`. Body order is `[platform, proximal 1..3, distal 1..3]`.
//!
//! Frames: platform `R_p = Rz(θ1) Ry(θ2) Rx(θ3)`; proximal `Rz(λ) Rx(γ − π) Rz(q)`;
//! distal `proximal · Rx(α1) · Rz(ψ)`, with `ψ` the angle that places `v̂_i` on the
//! distal arc.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3xX, RowVector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{BodyInertia, BodyKinematics, Kinematics, SprModel, Workspace};
use crate::spatial::{euler_rate_map, euler_rate_map_dot, euler_zyx_rotation, rot_x, rot_z, skew, Mat3, Vec3};

/// Smallest `|h_i|` accepted before a leg counts as singular.
pub const LEG_SINGULAR_EPS: f64 = 1e-10;

/// Largest per-sample change of an actuated angle accepted by [`rrr_ik_tracked`].
pub const MAX_BRANCH_STEP: f64 = core::f64::consts::FRAC_PI_2;

/// Which of the two closure roots a leg sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rrr3Geometry {
    /// Base placement angles of the actuated axes.
    pub lambda: [f64; 3],
    /// Platform placement angles of the platform axes.
    pub eta: [f64; 3],
    /// Base pyramid angle (tilt of `û_i` from `−ẑ`).
    pub gamma_base: f64,
    /// Platform pyramid angle (tilt of `v̂*_i` from `ẑ`).
    pub beta_plat: f64,
    pub alpha1: [f64; 3],
    pub alpha2: [f64; 3],
    pub branch: [Branch; 3],
}

impl Rrr3Geometry {
    pub fn validate(&self) -> Result<()> {
        let pi = core::f64::consts::PI;
        for i in 0..3 {
            if !(self.alpha1[i] > 0.0 && self.alpha1[i] < pi && self.alpha2[i] > 0.0 && self.alpha2[i] < pi) {
                return Err(Error::invalid(format!("leg {i}: link lengths must lie in (0, π)")));
            }
        }
        let all = self.lambda.iter().chain(&self.eta).chain(&self.alpha1).chain(&self.alpha2);
        if !all.chain([&self.gamma_base, &self.beta_plat]).all(|x| x.is_finite()) {
            return Err(Error::invalid("3-RRR geometry must be finite"));
        }
        Ok(())
    }

    /// Symmetric build with regular base and platform pyramids.
    pub fn symmetric() -> Self {
        let deg = core::f64::consts::PI / 180.0;
        let third = 3.0f64.sqrt() / 3.0;
        let place = [0.0, 120.0 * deg, 240.0 * deg];
        Rrr3Geometry {
            lambda: place,
            eta: place,
            gamma_base: third.acos(),
            beta_plat: third.asin(),
            alpha1: [80.0 * deg; 3],
            alpha2: [70.0 * deg; 3],
            branch: [Branch::Plus; 3],
        }
    }

    fn base_frame(&self, i: usize) -> Mat3 {
        rot_z(self.lambda[i]) * rot_x(self.gamma_base - core::f64::consts::PI)
    }

    /// `û_i`, fixed in the base.
    pub fn u(&self, i: usize) -> Vec3 {
        self.base_frame(i) * Vec3::z()
    }

    /// `v̂*_i`, the platform axis at `θ = 0`.
    pub fn v_star(&self, i: usize) -> Vec3 {
        rot_z(self.eta[i]) * rot_x(-self.beta_plat) * Vec3::z()
    }

    pub fn w(&self, i: usize, q: f64) -> Vec3 {
        self.proximal_frame(i, q) * rot_x(self.alpha1[i]) * Vec3::z()
    }

    pub fn proximal_frame(&self, i: usize, q: f64) -> Mat3 {
        self.base_frame(i) * rot_z(q)
    }
}

/// Unit vectors `(û_i, ŵ_i, v̂_i)` at platform angles `θ` and actuated angles `q`.
pub fn rrr_unit_vectors(geom: &Rrr3Geometry, theta: &[f64; 3], q: &[f64; 3]) -> [(Vec3, Vec3, Vec3); 3] {
    let rp = euler_zyx_rotation(theta[0], theta[1], theta[2]);
    core::array::from_fn(|i| (geom.u(i), geom.w(i, q[i]), rp * geom.v_star(i)))
}

/// Closure coefficients `(A, B, C)` with `A cos q + B sin q = C` for leg `i`.
fn closure_coefficients(geom: &Rrr3Geometry, i: usize, v: &Vec3) -> (f64, f64, f64) {
    let a = geom.base_frame(i).transpose() * v;
    let (s1, c1) = geom.alpha1[i].sin_cos();
    (-s1 * a.y, s1 * a.x, geom.alpha2[i].cos() - c1 * a.z)
}

/// Both closure roots of leg `i`, `[plus, minus]`.
fn leg_roots(geom: &Rrr3Geometry, i: usize, v: &Vec3) -> Result<[f64; 2]> {
    let (a, b, c) = closure_coefficients(geom, i, v);
    let r = a.hypot(b);
    if r < LEG_SINGULAR_EPS {
        return Err(Error::singular(format!("leg {i}: closure has no dependence on q")));
    }
    let arg = c / r;
    if arg.abs() > 1.0 + 1e-12 {
        return Err(Error::Unreachable(format!("leg {i}: |C| / √(A² + B²) = {}", arg.abs())));
    }
    let base = b.atan2(a);
    let off = arg.clamp(-1.0, 1.0).acos();
    Ok([base + off, base - off])
}

fn platform_axes(geom: &Rrr3Geometry, theta: &[f64; 3]) -> [Vec3; 3] {
    let rp = euler_zyx_rotation(theta[0], theta[1], theta[2]);
    core::array::from_fn(|i| rp * geom.v_star(i))
}

/// Inverse kinematics on the geometry's configured branches.
pub fn rrr_ik(geom: &Rrr3Geometry, theta: &[f64; 3]) -> Result<[f64; 3]> {
    let v = platform_axes(geom, theta);
    let mut q = [0.0; 3];
    for i in 0..3 {
        let roots = leg_roots(geom, i, &v[i])?;
        q[i] = match geom.branch[i] {
            Branch::Plus => roots[0],
            Branch::Minus => roots[1],
        };
    }
    Ok(q)
}

fn wrap_pi(x: f64) -> f64 {
    let tau = core::f64::consts::TAU;
    x - tau * ((x + core::f64::consts::PI) / tau).floor()
}

/// Inverse kinematics that follows, per leg, the root nearest `q_prev`.
///
/// The returned angles are unwrapped to stay continuous with `q_prev`.
pub fn rrr_ik_tracked(geom: &Rrr3Geometry, theta: &[f64; 3], q_prev: &[f64; 3]) -> Result<[f64; 3]> {
    let v = platform_axes(geom, theta);
    let mut q = [0.0; 3];
    for i in 0..3 {
        let roots = leg_roots(geom, i, &v[i])?;
        let steps = roots.map(|r| wrap_pi(r - q_prev[i]));
        let step = if steps[0].abs() <= steps[1].abs() { steps[0] } else { steps[1] };
        if step.abs() > MAX_BRANCH_STEP {
            return Err(Error::BranchJump { leg: i, jump: step.abs() });
        }
        q[i] = q_prev[i] + step;
    }
    Ok(q)
}

/// A fully evaluated pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Rrr3Pose {
    pub theta: [f64; 3],
    pub q: [f64; 3],
    pub rp: Mat3,
    pub u: [Vec3; 3],
    pub w: [Vec3; 3],
    pub v: [Vec3; 3],
    pub v_star: [Vec3; 3],
    pub p1: [Vec3; 3],
    pub p2: [Vec3; 3],
    pub h: [f64; 3],
}

impl Rrr3Pose {
    pub fn new(geom: &Rrr3Geometry, theta: [f64; 3]) -> Result<Self> {
        let q = rrr_ik(geom, &theta)?;
        Self::with_actuators(geom, theta, q)
    }

    /// Pose at `θ` with already-solved actuated angles.
    pub fn with_actuators(geom: &Rrr3Geometry, theta: [f64; 3], q: [f64; 3]) -> Result<Self> {
        let rp = euler_zyx_rotation(theta[0], theta[1], theta[2]);
        let u: [Vec3; 3] = core::array::from_fn(|i| geom.u(i));
        let w: [Vec3; 3] = core::array::from_fn(|i| geom.w(i, q[i]));
        let v_star: [Vec3; 3] = core::array::from_fn(|i| geom.v_star(i));
        let v: [Vec3; 3] = core::array::from_fn(|i| rp * v_star[i]);
        let p1: [Vec3; 3] = core::array::from_fn(|i| v[i].cross(&w[i]));
        let p2: [Vec3; 3] = core::array::from_fn(|i| u[i].cross(&v[i]));
        let h: [f64; 3] = core::array::from_fn(|i| p1[i].dot(&u[i]));
        for (i, hi) in h.iter().enumerate() {
            if hi.abs() < LEG_SINGULAR_EPS {
                return Err(Error::singular(format!("leg {i}: h = {hi:e}")));
            }
        }
        Ok(Rrr3Pose { theta, q, rp, u, w, v, v_star, p1, p2, h })
    }

    /// Largest `|ŵ_i·v̂_i − cos α2_i|` over the legs.
    pub fn closure_residual(&self, geom: &Rrr3Geometry) -> f64 {
        (0..3).map(|i| (self.w[i].dot(&self.v[i]) - geom.alpha2[i].cos()).abs()).fold(0.0, f64::max)
    }

    pub fn euler_map(&self) -> Mat3 {
        euler_rate_map(self.theta[0], self.theta[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rrr3Jacobians {
    /// `q̇ = J_ω θ̇`.
    pub actuator: Mat3,
    /// `ψ̇ = J_ωp θ̇`.
    pub passive: Mat3,
    pub proximal: [Mat3; 3],
    pub distal: [Mat3; 3],
}

fn row(v: &Vec3) -> RowVector3<f64> {
    v.transpose()
}

fn rows(r: [RowVector3<f64>; 3]) -> Mat3 {
    Mat3::from_rows(&r)
}

pub fn rrr_jacobians(pose: &Rrr3Pose) -> Rrr3Jacobians {
    let e = pose.euler_map();
    let ja: [RowVector3<f64>; 3] = core::array::from_fn(|i| row(&pose.p1[i]) * e / pose.h[i]);
    let jp: [RowVector3<f64>; 3] = core::array::from_fn(|i| row(&pose.p2[i]) * e / pose.h[i]);
    let proximal: [Mat3; 3] = core::array::from_fn(|i| pose.u[i] * ja[i]);
    let distal: [Mat3; 3] = core::array::from_fn(|i| proximal[i] + pose.w[i] * jp[i]);
    Rrr3Jacobians { actuator: rows(ja), passive: rows(jp), proximal, distal }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rrr3JacobianDots {
    pub actuator: Mat3,
    pub passive: Mat3,
    pub euler: Mat3,
    pub proximal: [Mat3; 3],
    pub distal: [Mat3; 3],
}

/// Jacobian derivatives along `θ̇`.
pub fn rrr_jacobian_dots(pose: &Rrr3Pose, jac: &Rrr3Jacobians, theta_dot: &[f64; 3]) -> Rrr3JacobianDots {
    let td = Vec3::from(*theta_dot);
    let e = pose.euler_map();
    let e_dot = euler_rate_map_dot(pose.theta[0], pose.theta[1], td.x, td.y);
    let omega_p = e * td;
    let q_dot = jac.actuator * td;
    let mut ja = [RowVector3::zeros(); 3];
    let mut jp = [RowVector3::zeros(); 3];
    let mut proximal = [Mat3::zeros(); 3];
    let mut distal = [Mat3::zeros(); 3];
    for i in 0..3 {
        let (u, w, v, h) = (pose.u[i], pose.w[i], pose.v[i], pose.h[i]);
        let v_dot = skew(&omega_p) * v;
        let w_dot = u.cross(&w) * q_dot[i];
        let p1_dot = v_dot.cross(&w) + v.cross(&w_dot);
        let p2_dot = u.cross(&v_dot);
        let h_dot = p1_dot.dot(&u);
        let (p1, p2) = (row(&pose.p1[i]), row(&pose.p2[i]));
        ja[i] = (row(&p1_dot) * e + p1 * e_dot) / h - p1 * e * (h_dot / (h * h));
        jp[i] = (row(&p2_dot) * e + p2 * e_dot) / h - p2 * e * (h_dot / (h * h));
        proximal[i] = u * ja[i];
        distal[i] = proximal[i] + w_dot * jac.passive.row(i) + w * jp[i];
    }
    Rrr3JacobianDots { actuator: rows(ja), passive: rows(jp), euler: e_dot, proximal, distal }
}

/// Distal passive angle of leg `i`: the `ψ` with `proximal · Rx(α1) · Rz(ψ) · Rx(α2) ẑ = v̂_i`.
fn distal_angle(geom: &Rrr3Geometry, i: usize, q: f64, v: &Vec3) -> f64 {
    let local = (geom.proximal_frame(i, q) * rot_x(geom.alpha1[i])).transpose() * v;
    local.x.atan2(-local.y)
}

/// `(R_p, proximal frames, distal frames)`.
pub fn rrr_link_rotations(geom: &Rrr3Geometry, pose: &Rrr3Pose) -> (Mat3, [Mat3; 3], [Mat3; 3]) {
    let prox: [Mat3; 3] = core::array::from_fn(|i| geom.proximal_frame(i, pose.q[i]));
    let dist: [Mat3; 3] = core::array::from_fn(|i| {
        prox[i] * rot_x(geom.alpha1[i]) * rot_z(distal_angle(geom, i, pose.q[i], &pose.v[i]))
    });
    (pose.rp, prox, dist)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rrr3 {
    pub geometry: Rrr3Geometry,
    bodies: Vec<BodyInertia>,
    gravity: Vec3,
    workspace: Workspace,
}

fn theta3(theta: &DVector<f64>) -> Result<[f64; 3]> {
    if theta.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: theta.len() });
    }
    Ok([theta[0], theta[1], theta[2]])
}

fn to_dmatrix(m: &Mat3) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

fn to_3xx(m: &Mat3) -> Matrix3xX<f64> {
    Matrix3xX::from_column_slice(m.as_slice())
}

impl Rrr3 {
    pub fn new(geometry: Rrr3Geometry, bodies: Vec<BodyInertia>, gravity: Vec3) -> Result<Self> {
        geometry.validate()?;
        if bodies.len() != 7 {
            return Err(Error::invalid(format!("3-RRR needs 7 bodies, got {}", bodies.len())));
        }
        let lim = 30.0f64.to_radians();
        let workspace = Workspace { lower: vec![-lim; 3], upper: vec![lim; 3], periodic: vec![false; 3], slack: 1e-3 };
        Ok(Rrr3 { geometry, bodies, gravity, workspace })
    }

    pub fn default_bodies() -> Vec<BodyInertia> {
        let body = |name: &str, m: f64, cm: [f64; 3], i: [f64; 3]| {
            BodyInertia::new(name, m, Vec3::from(cm), Mat3::from_diagonal(&Vec3::from(i))).expect("table values")
        };
        let mut out = vec![body("platform", 0.604, [0.0, 0.0, 0.084], [0.003, 0.001, 0.001])];
        for i in 1..=3 {
            out.push(body(&format!("proximal{i}"), 0.501, [0.0, -0.117, 0.139], [0.003, 0.003, 0.0]));
        }
        for i in 1..=3 {
            out.push(body(&format!("distal{i}"), 0.389, [0.0, -0.093, 0.133], [0.001, 0.001, 0.0]));
        }
        out
    }

    /// The symmetric reference build and its mass properties.
    pub fn reference() -> Self {
        Rrr3::new(Rrr3Geometry::symmetric(), Self::default_bodies(), Vec3::new(0.0, 0.0, -9.81)).expect("default model")
    }

    pub fn pose(&self, theta: &DVector<f64>) -> Result<Rrr3Pose> {
        Rrr3Pose::new(&self.geometry, theta3(theta)?)
    }
}

impl SprModel for Rrr3 {
    fn name(&self) -> &str {
        "3rrr"
    }

    fn dof(&self) -> usize {
        3
    }

    fn bodies(&self) -> &[BodyInertia] {
        &self.bodies
    }

    fn gravity(&self) -> Vec3 {
        self.gravity
    }

    fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    fn kinematics(&self, theta: &DVector<f64>, theta_dot: &DVector<f64>) -> Result<Kinematics> {
        let pose = self.pose(theta)?;
        let td = theta3(theta_dot)?;
        let jac = rrr_jacobians(&pose);
        let dots = rrr_jacobian_dots(&pose, &jac, &td);
        let (rp, prox, dist) = rrr_link_rotations(&self.geometry, &pose);
        let mut bodies = Vec::with_capacity(7);
        bodies.push(BodyKinematics { rotation: rp, jacobian: to_3xx(&pose.euler_map()), jacobian_dot: to_3xx(&dots.euler) });
        for i in 0..3 {
            bodies.push(BodyKinematics { rotation: prox[i], jacobian: to_3xx(&jac.proximal[i]), jacobian_dot: to_3xx(&dots.proximal[i]) });
        }
        for i in 0..3 {
            bodies.push(BodyKinematics { rotation: dist[i], jacobian: to_3xx(&jac.distal[i]), jacobian_dot: to_3xx(&dots.distal[i]) });
        }
        Ok(Kinematics { actuator: to_dmatrix(&jac.actuator), actuator_dot: to_dmatrix(&dots.actuator), bodies })
    }

    fn body_rotations(&self, theta: &DVector<f64>) -> Result<Vec<Mat3>> {
        let pose = self.pose(theta)?;
        let (rp, prox, dist) = rrr_link_rotations(&self.geometry, &pose);
        let mut out = vec![rp];
        out.extend_from_slice(&prox);
        out.extend_from_slice(&dist);
        Ok(out)
    }

    fn actuator_positions(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let q = rrr_ik(&self.geometry, &theta3(theta)?)?;
        Ok(DVector::from_row_slice(&q))
    }

    fn with_bodies(&self, bodies: Vec<BodyInertia>) -> Result<Box<dyn SprModel>> {
        Ok(Box::new(Rrr3::new(self.geometry, bodies, self.gravity)?))
    }
}
