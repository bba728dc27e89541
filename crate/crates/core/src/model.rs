//! The robot-independent contract shared by every spherical parallel robot model.
//!
//! Every body (links, and the moving platform when it is a distinct body) rotates
//! about the fixed center of rotation, so a body is fully described at a state by its
//! rotation matrix, its angular Jacobian `Jw` (with `ω = Jw θ̇`) and `Jw_dot`.
//! Where the platform is a body of its own it comes first in the body list.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3xX};

use crate::error::{Error, Result};
use crate::spatial::{parallel_axis_to_pivot, InertiaVec6, Mat3, Vec3};

/// Task-space state together with optional reference signals.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskState {
    pub theta: DVector<f64>,
    pub theta_dot: DVector<f64>,
    pub theta_ddot: Option<DVector<f64>>,
    pub theta_dot_ref: Option<DVector<f64>>,
    pub theta_ddot_ref: Option<DVector<f64>>,
}

impl TaskState {
    pub fn new(theta: DVector<f64>, theta_dot: DVector<f64>) -> Self {
        TaskState { theta, theta_dot, theta_ddot: None, theta_dot_ref: None, theta_ddot_ref: None }
    }

    pub fn with_accel(mut self, theta_ddot: DVector<f64>) -> Self {
        self.theta_ddot = Some(theta_ddot);
        self
    }

    pub fn with_reference(mut self, theta_dot_ref: DVector<f64>, theta_ddot_ref: DVector<f64>) -> Self {
        self.theta_dot_ref = Some(theta_dot_ref);
        self.theta_ddot_ref = Some(theta_ddot_ref);
        self
    }

    pub fn dof(&self) -> usize {
        self.theta.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyKinematics {
    /// Body-to-base rotation.
    pub rotation: Mat3,
    pub jacobian: Matrix3xX<f64>,
    pub jacobian_dot: Matrix3xX<f64>,
}

impl BodyKinematics {
    pub fn angular_velocity(&self, theta_dot: &DVector<f64>) -> Vec3 {
        &self.jacobian * theta_dot
    }
}

/// Everything the dynamics needs from a model at one `(θ, θ̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    /// Actuator Jacobian, `q̇ = J θ̇`.
    pub actuator: DMatrix<f64>,
    pub actuator_dot: DMatrix<f64>,
    pub bodies: Vec<BodyKinematics>,
}

/// Mass properties of one body, all referred to its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyInertia {
    pub name: String,
    pub mass: f64,
    /// CG position from the pivot, body frame.
    pub cm: Vec3,
    /// Inertia about the CG, body frame.
    pub inertia_cg: Mat3,
}

impl BodyInertia {
    pub fn new(name: impl Into<String>, mass: f64, cm: Vec3, inertia_cg: Mat3) -> Result<Self> {
        if !(mass >= 0.0) || !mass.is_finite() {
            return Err(Error::invalid("body mass must be finite and non-negative"));
        }
        if (inertia_cg - inertia_cg.transpose()).abs().max() > 0.0 {
            return Err(Error::invalid("CG inertia must be symmetric"));
        }
        let eig = inertia_cg.symmetric_eigenvalues();
        if eig.min() < -1e-12 * eig.abs().max().max(1.0) {
            return Err(Error::invalid("CG inertia must be positive semidefinite"));
        }
        Ok(BodyInertia { name: name.into(), mass, cm, inertia_cg })
    }

    /// Inertia about the pivot, body frame.
    pub fn inertia_pivot(&self) -> Mat3 {
        parallel_axis_to_pivot(&self.inertia_cg, self.mass, &self.cm)
    }

    pub fn first_moment(&self) -> Vec3 {
        self.cm * self.mass
    }

    /// Uniform scaling of mass and inertia (CG location unchanged).
    pub fn scaled(&self, factor: f64) -> Self {
        BodyInertia {
            name: self.name.clone(),
            mass: self.mass * factor,
            cm: self.cm,
            inertia_cg: self.inertia_cg * factor,
        }
    }

    /// The 9-parameter block `[m ρ; vec(I_pivot)]`.
    pub fn pi_block(&self) -> [f64; 9] {
        let mr = self.first_moment();
        let iv = InertiaVec6::from_matrix(&self.inertia_pivot()).0;
        [mr.x, mr.y, mr.z, iv[0], iv[1], iv[2], iv[3], iv[4], iv[5]]
    }
}

/// Axis-aligned box of admissible task coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Periodic coordinates are sampled in `[lower, upper)` but never rejected.
    pub periodic: Vec<bool>,
    /// Slack allowed outside the box, so finite-difference probes at the boundary pass.
    pub slack: f64,
}

impl Workspace {
    pub fn check(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.lower.len() {
            return Err(Error::DimensionMismatch { expected: self.lower.len(), got: theta.len() });
        }
        for (i, &v) in theta.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::WorkspaceViolation { index: i, value: v, lo: self.lower[i], hi: self.upper[i] });
            }
            if self.periodic[i] {
                continue;
            }
            if v < self.lower[i] - self.slack || v > self.upper[i] + self.slack {
                return Err(Error::WorkspaceViolation { index: i, value: v, lo: self.lower[i], hi: self.upper[i] });
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        self.check(theta).is_ok()
    }
}

/// A spherical parallel robot: kinematics plus the mass properties of its bodies.
///
/// Implementations must be fully parallel and non-redundant (`actuators == dof`).
pub trait SprModel: Send + Sync {
    fn name(&self) -> &str;

    /// Task-space dimension `m`.
    fn dof(&self) -> usize;

    fn bodies(&self) -> &[BodyInertia];

    fn gravity(&self) -> Vec3;

    fn workspace(&self) -> &Workspace;

    /// Closed-form kinematics at `(θ, θ̇)`.
    fn kinematics(&self, theta: &DVector<f64>, theta_dot: &DVector<f64>) -> Result<Kinematics>;

    /// Position-level body rotations only, in canonical body order.
    fn body_rotations(&self, theta: &DVector<f64>) -> Result<Vec<Mat3>>;

    /// Actuated joint angles at `θ`.
    fn actuator_positions(&self, theta: &DVector<f64>) -> Result<DVector<f64>>;

    /// Same kinematics, different mass properties.
    fn with_bodies(&self, bodies: Vec<BodyInertia>) -> Result<Box<dyn SprModel>>;

    fn body_count(&self) -> usize {
        self.bodies().len()
    }

    fn param_count(&self) -> usize {
        9 * self.body_count()
    }
}

/// Stacked inertial parameters, nine per body in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct PiVector(pub DVector<f64>);

impl PiVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn block(&self, body: usize) -> &[f64] {
        &self.0.as_slice()[9 * body..9 * body + 9]
    }
}

pub fn assemble_pi_from(bodies: &[BodyInertia]) -> PiVector {
    let mut v = DVector::zeros(9 * bodies.len());
    for (b, body) in bodies.iter().enumerate() {
        v.as_mut_slice()[9 * b..9 * b + 9].copy_from_slice(&body.pi_block());
    }
    PiVector(v)
}

pub fn assemble_pi(model: &dyn SprModel) -> PiVector {
    assemble_pi_from(model.bodies())
}

/// Evaluate kinematics after checking dimensions and the workspace.
pub fn eval_kinematics(model: &dyn SprModel, theta: &DVector<f64>, theta_dot: &DVector<f64>) -> Result<Kinematics> {
    let m = model.dof();
    if theta_dot.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: theta_dot.len() });
    }
    model.workspace().check(theta)?;
    model.kinematics(theta, theta_dot)
}
