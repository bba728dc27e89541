//! Rotation and skew algebra about a fixed pivot, the ZYX Euler-rate map,
//! inertia packing, and central finite differences.
//!
//! Angles are radians. Inertia vectors use the order `[xx, xy, xz, yy, yz, zz]`
//! everywhere in the crate.

use core::ops::{Mul, Sub};

use nalgebra::{Matrix3, Matrix3x6, Vector3, Vector6};
#[allow(unused_imports)]
use num_traits::Float;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Tilde36 = Matrix3x6<f64>;

/// Step used for first-derivative central differences on radian-scaled inputs.
pub const FD_STEP: f64 = 1e-6;
/// Step used for the outer level of nested (second-derivative) differences.
pub const FD_STEP_OUTER: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Inverse of [`skew`] for a (nearly) antisymmetric matrix; averages the two halves.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Elemental rotation about a base axis.
pub fn axis_rotation(axis: Axis, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    match axis {
        Axis::X => Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        Axis::Y => Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        Axis::Z => Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

pub fn rot_x(angle: f64) -> Mat3 {
    axis_rotation(Axis::X, angle)
}

pub fn rot_y(angle: f64) -> Mat3 {
    axis_rotation(Axis::Y, angle)
}

pub fn rot_z(angle: f64) -> Mat3 {
    axis_rotation(Axis::Z, angle)
}

/// `Rz(t1) * Ry(t2) * Rx(t3)`.
pub fn euler_zyx_rotation(t1: f64, t2: f64, t3: f64) -> Mat3 {
    rot_z(t1) * rot_y(t2) * rot_x(t3)
}

/// Maps ZYX Euler rates to the base-frame angular velocity, `ω = E θ̇`.
///
/// Independent of the third angle.
pub fn euler_rate_map(t1: f64, t2: f64) -> Mat3 {
    let (s1, c1) = t1.sin_cos();
    let (s2, c2) = t2.sin_cos();
    Mat3::new(0.0, -s1, c1 * c2, 0.0, c1, s1 * c2, 1.0, 0.0, -s2)
}

/// Total time derivative of [`euler_rate_map`].
pub fn euler_rate_map_dot(t1: f64, t2: f64, t1_dot: f64, t2_dot: f64) -> Mat3 {
    let (s1, c1) = t1.sin_cos();
    let (s2, c2) = t2.sin_cos();
    Mat3::new(
        0.0,
        -c1 * t1_dot,
        -s1 * c2 * t1_dot - c1 * s2 * t2_dot,
        0.0,
        -s1 * t1_dot,
        c1 * c2 * t1_dot - s1 * s2 * t2_dot,
        0.0,
        0.0,
        -c2 * t2_dot,
    )
}

/// Six independent entries of a symmetric inertia tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InertiaVec6(pub [f64; 6]);

impl InertiaVec6 {
    pub fn from_matrix(m: &Mat3) -> Self {
        InertiaVec6([m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]])
    }

    pub fn to_matrix(&self) -> Mat3 {
        let [xx, xy, xz, yy, yz, zz] = self.0;
        Mat3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.0)
    }
}

pub fn inertia_vec_to_matrix(v: &InertiaVec6) -> Mat3 {
    v.to_matrix()
}

pub fn matrix_to_inertia_vec(m: &Mat3) -> InertiaVec6 {
    InertiaVec6::from_matrix(m)
}

/// Linear operator with `inertia_tilde(ω) * vec(I) == I * ω`.
pub fn inertia_tilde(w: &Vec3) -> Tilde36 {
    let (x, y, z) = (w.x, w.y, w.z);
    #[rustfmt::skip]
    let t = Tilde36::new(
        x,   y,   z,   0.0, 0.0, 0.0,
        0.0, x,   0.0, y,   z,   0.0,
        0.0, 0.0, x,   0.0, y,   z,
    );
    t
}

/// Parallel-axis shift of a CG inertia to the pivot at `-rho` from the CG.
pub fn parallel_axis_to_pivot(i_cg: &Mat3, mass: f64, rho: &Vec3) -> Mat3 {
    i_cg + (Mat3::identity() * rho.norm_squared() - rho * rho.transpose()) * mass
}

/// Central difference of `f` at `x`.
pub fn central_diff<T, F>(f: F, x: f64, h: f64) -> T
where
    F: Fn(f64) -> T,
    T: Sub<Output = T> + Mul<f64, Output = T>,
{
    (f(x + h) - f(x - h)) * (0.5 / h)
}

/// Five-point central difference, `O(h⁴)` truncation.
pub fn central_diff5<T, F>(f: F, x: f64, h: f64) -> T
where
    F: Fn(f64) -> T,
    T: Sub<Output = T> + Mul<f64, Output = T>,
{
    let near = f(x + h) - f(x - h);
    let far = f(x + 2.0 * h) - f(x - 2.0 * h);
    (near * 8.0 - far) * (1.0 / (12.0 * h))
}

/// Angular velocity implied by a rotation path, `vee(Ṙ Rᵀ)`, with `Ṙ` by central difference.
pub fn fd_angular_velocity<F>(rotation: F, t: f64, h: f64) -> Vec3
where
    F: Fn(f64) -> Mat3,
{
    let r_dot = central_diff(&rotation, t, h);
    vee(&(r_dot * rotation(t).transpose()))
}

/// Deviation of `r` from a proper rotation: `max(|RᵀR − I|, |det R − 1|)`.
pub fn rotation_defect(r: &Mat3) -> f64 {
    let ortho = (r.transpose() * r - Mat3::identity()).abs().max();
    ortho.max((r.determinant() - 1.0).abs())
}
