//! ARAS-Diamond: a 2-DOF spherical five-bar.
//!
//! Task coordinates are the spherical angles `θ = [φ, γ]` of the end-effector axis
//! `d̂ = Rz(φ) Ry(γ) ẑ`. The two actuated proximal links turn about `â = ẑ`; link 1
//! is driven by `q2` and carries the elbow axis `b̂`, link 2 is driven by `q1` and
//! carries `ĉ`. Links 3 and 4 join the elbows to `d̂`. There is no separate platform
//! body, so the body list is `[link1, link2, link3, link4]`.
//!
//! Link frames: `R1 = Rz(q2)`, `R2 = Rz(q1)` and `R3 = R1 Ry(α) Rz(ψ3)`,
//! `R4 = R2 Ry(α) Rz(ψ4)`. Each frame's z-axis is the joint axis the link turns
//! about and the link's arc lies in the frame's +x half of the x-z plane.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3xX};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{BodyInertia, BodyKinematics, Kinematics, SprModel, Workspace};
use crate::spatial::{rot_y, rot_z, Mat3, Vec3};

/// Smallest `|sin|` accepted in a kinematic denominator.
pub const SINGULAR_EPS: f64 = 1e-12;

/// Rounding overshoot tolerated in an arccos argument before a pose counts as unreachable.
pub const ACOS_SLACK: f64 = 1e-12;

/// Below this `|cos B̂|` the passive-rate coefficient switches to its sine form,
/// which stays regular where the elbow angle passes 90°.
const COS_B_SWITCH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiamondGeometry {
    /// Angular length of the proximal links.
    pub alpha: f64,
    /// Angular length of the distal links.
    pub beta: f64,
}

impl DiamondGeometry {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let half_pi = core::f64::consts::FRAC_PI_2;
        if !(alpha > 0.0 && alpha < half_pi && beta > 0.0 && beta < half_pi) {
            return Err(Error::invalid("diamond link lengths must lie in (0, π/2)"));
        }
        Ok(DiamondGeometry { alpha, beta })
    }
}

/// Inverse kinematics: actuated angles and the interior/passive angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiamondIk {
    pub q1: f64,
    pub q2: f64,
    /// Interior angle at `â` between the arcs to `d̂` and to an elbow, in `[0, π]`.
    pub a_hat: f64,
    /// Elbow interior angle; the other chain's passive angle is `-b_hat`.
    pub b_hat: f64,
}

pub fn diamond_ik(geom: &DiamondGeometry, phi: f64, gamma: f64) -> Result<DiamondIk> {
    let (sa, ca) = geom.alpha.sin_cos();
    let (sb, cb) = geom.beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let den = sg * sa;
    if den.abs() < SINGULAR_EPS {
        return Err(Error::singular(format!("sin γ sin α = {den:e}")));
    }
    let arg = (cb - cg * ca) / den;
    if !(arg.abs() <= 1.0 + ACOS_SLACK) {
        return Err(Error::Unreachable(format!("γ = {gamma}: cos Â = {arg}")));
    }
    let a_hat = arg.clamp(-1.0, 1.0).acos();
    let b_arg = ((cg - ca * cb) / (sa * sb)).clamp(-1.0, 1.0);
    Ok(DiamondIk { q1: phi + a_hat, q2: phi - a_hat, a_hat, b_hat: b_arg.acos() })
}

/// `h = ∂q1/∂γ = -∂q2/∂γ`.
///
/// Equal to `(cos Â cot γ − cot α) / sin Â`, the negative of the printed appendix
/// expression; the printed sign contradicts the inverse kinematics it is meant to
/// differentiate.
pub fn diamond_h(geom: &DiamondGeometry, gamma: f64, a_hat: f64) -> Result<f64> {
    let sa_hat = a_hat.sin();
    if sa_hat.abs() < SINGULAR_EPS {
        return Err(Error::singular("sin Â = 0 (stretched or folded arm)"));
    }
    let cot_g = gamma.cos() / gamma.sin();
    let cot_a = geom.alpha.cos() / geom.alpha.sin();
    Ok((a_hat.cos() * cot_g - cot_a) / sa_hat)
}

/// `s` with `dB̂/dt = s γ̇`, in the cosine-denominator form.
pub fn diamond_s(geom: &DiamondGeometry, gamma: f64, a_hat: f64, b_hat: f64, h: f64) -> Result<f64> {
    let den = b_hat.cos() * geom.beta.sin();
    if den.abs() < SINGULAR_EPS {
        return Err(Error::singular("cos B̂ = 0"));
    }
    let (sg, cg) = gamma.sin_cos();
    let (sa_hat, ca_hat) = a_hat.sin_cos();
    Ok((cg * sa_hat + h * sg * ca_hat) / den)
}

/// `c` with `dh/dt = c γ̇`.
pub fn diamond_c(geom: &DiamondGeometry, gamma: f64, a_hat: f64, h: f64) -> Result<f64> {
    let (sa_hat, ca_hat) = a_hat.sin_cos();
    if sa_hat.abs() < SINGULAR_EPS {
        return Err(Error::singular("sin Â = 0 (stretched or folded arm)"));
    }
    let (sa, ca) = geom.alpha.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let num = h * sg * (ca * ca_hat * sg - sa * cg) - sa_hat * ca_hat * sa;
    Ok(num / (sg * sg * sa * sa_hat * sa_hat))
}

/// Time derivative of `s`, as the quotient `ṡ_n / ṡ_d`.
#[allow(clippy::too_many_arguments)]
pub fn diamond_s_dot(
    geom: &DiamondGeometry,
    gamma: f64,
    a_hat: f64,
    b_hat: f64,
    h: f64,
    s: f64,
    c: f64,
    gamma_dot: f64,
) -> Result<f64> {
    let (sb_hat, cb_hat) = b_hat.sin_cos();
    let den = cb_hat * cb_hat * geom.beta.sin();
    if den.abs() < SINGULAR_EPS {
        return Err(Error::singular("cos B̂ = 0"));
    }
    let (sg, cg) = gamma.sin_cos();
    let (sa_hat, ca_hat) = a_hat.sin_cos();
    let num = h * gamma_dot * cb_hat * (-h * sa_hat * sg + ca_hat * cg)
        + s * gamma_dot * sb_hat * (h * ca_hat * sg + sa_hat * cg)
        + cb_hat * (gamma_dot * (h * cg * ca_hat - sa_hat * sg) + c * gamma_dot * sg * ca_hat);
    Ok(num / den)
}

/// `s` and `ṡ/γ̇` in sine form: `s = sin γ / (sin α sin β sin B̂)`.
fn sine_form(geom: &DiamondGeometry, gamma: f64, b_hat: f64) -> Result<(f64, f64)> {
    let k = geom.alpha.sin() * geom.beta.sin();
    let sb_hat = b_hat.sin();
    if sb_hat.abs() < SINGULAR_EPS {
        return Err(Error::singular("sin B̂ = 0 (distal link folded)"));
    }
    let (sg, cg) = gamma.sin_cos();
    let s = sg / (k * sb_hat);
    let ds = (cg * sb_hat - sg * b_hat.cos() * s) / (k * sb_hat * sb_hat);
    Ok((s, ds))
}

/// A fully evaluated pose.
#[derive(Debug, Clone, PartialEq)]
pub struct DiamondPose {
    pub phi: f64,
    pub gamma: f64,
    pub ik: DiamondIk,
    pub a: Vec3,
    pub b: Vec3,
    pub c: Vec3,
    pub d: Vec3,
    pub h: f64,
    pub s: f64,
    /// `dh/dγ`.
    pub c_coef: f64,
    /// `ds/dγ`; `ṡ = ds_dgamma · γ̇` since `s` depends on `γ` alone.
    pub ds_dgamma: f64,
}

impl DiamondPose {
    pub fn new(geom: &DiamondGeometry, phi: f64, gamma: f64) -> Result<Self> {
        let ik = diamond_ik(geom, phi, gamma)?;
        let h = diamond_h(geom, gamma, ik.a_hat)?;
        let c_coef = diamond_c(geom, gamma, ik.a_hat, h)?;
        let (s, ds_dgamma) = if ik.b_hat.cos().abs() >= COS_B_SWITCH {
            let s = diamond_s(geom, gamma, ik.a_hat, ik.b_hat, h)?;
            let ds = diamond_s_dot(geom, gamma, ik.a_hat, ik.b_hat, h, s, c_coef, 1.0)?;
            (s, ds)
        } else {
            sine_form(geom, gamma, ik.b_hat)?
        };
        let a = Vec3::z();
        let b = rot_z(ik.q2) * rot_y(geom.alpha) * a;
        let c = rot_z(ik.q1) * rot_y(geom.alpha) * a;
        let d = rot_z(phi) * rot_y(gamma) * a;
        Ok(DiamondPose { phi, gamma, ik, a, b, c, d, h, s, c_coef, ds_dgamma })
    }

    /// `ĉ·d̂ − cos β` and `b̂·d̂ − cos β`, the larger in magnitude.
    pub fn closure_residual(&self, geom: &DiamondGeometry) -> f64 {
        let cb = geom.beta.cos();
        (self.c.dot(&self.d) - cb).abs().max((self.b.dot(&self.d) - cb).abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiamondJacobians {
    pub actuator: DMatrix<f64>,
    pub passive: DMatrix<f64>,
    pub links: [Matrix3xX<f64>; 4],
}

fn two_cols(c0: Vec3, c1: Vec3) -> Matrix3xX<f64> {
    Matrix3xX::from_columns(&[c0, c1])
}

pub fn diamond_jacobians(pose: &DiamondPose) -> DiamondJacobians {
    let (a, h, s) = (pose.a, pose.h, pose.s);
    let j1 = two_cols(a, -a * h);
    let j2 = two_cols(a, a * h);
    let j3 = &j1 + two_cols(Vec3::zeros(), -pose.b * s);
    let j4 = &j2 + two_cols(Vec3::zeros(), pose.c * s);
    DiamondJacobians {
        actuator: DMatrix::from_row_slice(2, 2, &[1.0, h, 1.0, -h]),
        passive: DMatrix::from_row_slice(2, 2, &[0.0, -s, 0.0, s]),
        links: [j1, j2, j3, j4],
    }
}

/// Link Jacobian derivatives along `θ̇ = [φ̇, γ̇]`, plus the actuator Jacobian derivative.
pub fn diamond_jacobian_dots(pose: &DiamondPose, jac: &DiamondJacobians, theta_dot: &DVector<f64>) -> (DMatrix<f64>, [Matrix3xX<f64>; 4]) {
    let gamma_dot = theta_dot[1];
    let h_dot = pose.c_coef * gamma_dot;
    let s_dot = pose.ds_dgamma * gamma_dot;
    let a = pose.a;
    let w1 = &jac.links[0] * theta_dot;
    let w2 = &jac.links[1] * theta_dot;
    let b_dot = w1.cross(&pose.b);
    let c_dot = w2.cross(&pose.c);
    let jd1 = two_cols(Vec3::zeros(), -a * h_dot);
    let jd2 = two_cols(Vec3::zeros(), a * h_dot);
    let jd3 = &jd1 + two_cols(Vec3::zeros(), -(pose.b * s_dot + b_dot * pose.s));
    let jd4 = &jd2 + two_cols(Vec3::zeros(), pose.c * s_dot + c_dot * pose.s);
    let act = DMatrix::from_row_slice(2, 2, &[0.0, h_dot, 0.0, -h_dot]);
    (act, [jd1, jd2, jd3, jd4])
}

/// Passive joint angle about the elbow axis carried by `frame`, placing `d̂` on the distal arc.
fn elbow_angle(frame: &Mat3, d: &Vec3) -> f64 {
    let local = frame.transpose() * d;
    local.y.atan2(local.x)
}

pub fn diamond_link_rotations(geom: &DiamondGeometry, pose: &DiamondPose) -> [Mat3; 4] {
    let r1 = rot_z(pose.ik.q2);
    let r2 = rot_z(pose.ik.q1);
    let f3 = r1 * rot_y(geom.alpha);
    let f4 = r2 * rot_y(geom.alpha);
    let r3 = f3 * rot_z(elbow_angle(&f3, &pose.d));
    let r4 = f4 * rot_z(elbow_angle(&f4, &pose.d));
    [r1, r2, r3, r4]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diamond {
    pub geometry: DiamondGeometry,
    bodies: Vec<BodyInertia>,
    gravity: Vec3,
    workspace: Workspace,
}

impl Diamond {
    pub fn new(geometry: DiamondGeometry, bodies: Vec<BodyInertia>, gravity: Vec3) -> Result<Self> {
        if bodies.len() != 4 {
            return Err(Error::invalid(format!("diamond needs 4 bodies, got {}", bodies.len())));
        }
        let deg = core::f64::consts::PI / 180.0;
        let workspace = Workspace {
            lower: vec![0.0, 5.0 * deg],
            upper: vec![360.0 * deg, 85.0 * deg],
            periodic: vec![true, false],
            slack: 1e-3,
        };
        Ok(Diamond { geometry, bodies, gravity, workspace })
    }

    pub fn default_geometry() -> DiamondGeometry {
        let a = 45.0f64.to_radians();
        DiamondGeometry { alpha: a, beta: a }
    }

    pub fn default_bodies() -> Vec<BodyInertia> {
        let row = |name: &str, m: f64, cm: [f64; 3], i: [f64; 3]| {
            BodyInertia::new(name, m, Vec3::from(cm), Mat3::from_diagonal(&(Vec3::from(i) * 1e-4))).expect("table values")
        };
        vec![
            row("link1", 0.117, [0.098, 0.0, 0.232], [6.440, 6.350, 1.716]),
            row("link2", 0.112, [0.087, 0.0, 0.210], [5.359, 5.284, 0.150]),
            row("link3", 0.155, [0.107, 0.0, 0.254], [9.849, 9.342, 0.610]),
            row("link4", 0.145, [0.078, 0.0, 0.188], [7.577, 7.496, 2.348]),
        ]
    }

    /// Geometry and mass properties of the reference ARAS-Diamond build.
    pub fn aras() -> Self {
        Diamond::new(Self::default_geometry(), Self::default_bodies(), Vec3::new(0.0, 0.0, -9.81)).expect("default model")
    }

    pub fn pose(&self, theta: &DVector<f64>) -> Result<DiamondPose> {
        if theta.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: theta.len() });
        }
        DiamondPose::new(&self.geometry, theta[0], theta[1])
    }
}

impl SprModel for Diamond {
    fn name(&self) -> &str {
        "diamond"
    }

    fn dof(&self) -> usize {
        2
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
        let jac = diamond_jacobians(&pose);
        let (act_dot, link_dots) = diamond_jacobian_dots(&pose, &jac, theta_dot);
        let rots = diamond_link_rotations(&self.geometry, &pose);
        let bodies = rots
            .iter()
            .zip(jac.links.iter())
            .zip(link_dots)
            .map(|((r, j), jd)| BodyKinematics { rotation: *r, jacobian: j.clone(), jacobian_dot: jd })
            .collect();
        Ok(Kinematics { actuator: jac.actuator, actuator_dot: act_dot, bodies })
    }

    fn body_rotations(&self, theta: &DVector<f64>) -> Result<Vec<Mat3>> {
        let pose = self.pose(theta)?;
        Ok(diamond_link_rotations(&self.geometry, &pose).to_vec())
    }

    fn actuator_positions(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        if theta.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: theta.len() });
        }
        let ik = diamond_ik(&self.geometry, theta[0], theta[1])?;
        Ok(DVector::from_vec(vec![ik.q1, ik.q2]))
    }

    fn with_bodies(&self, bodies: Vec<BodyInertia>) -> Result<Box<dyn SprModel>> {
        Ok(Box::new(Diamond::new(self.geometry, bodies, self.gravity)?))
    }
}
