//! Explicit task-space dynamics `M θ̈ + C θ̇ + g = J_ωᵀ τ + n_d`, energies, and a
//! fixed-step RK4 integrator.
//!
//! Every body rotates about the fixed pivot, so its contribution needs only its
//! rotation, `Jw`, `Jw_dot` and its pivot-point mass properties:
//! `M = Σ Jwᵀ ⁰I Jw`, `C = Σ Jwᵀ (⁰I Jw_dot + S(Jw θ̇) ⁰I Jw)` and
//! `g = −Σ m Jwᵀ S(R ρ) g₀`, with `⁰I = R I_pivot Rᵀ`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{eval_kinematics, BodyInertia, Kinematics, SprModel};
use crate::spatial::{skew, Mat3, Vec3};

/// Largest accepted condition number of the actuator Jacobian.
pub const JACOBIAN_COND_LIMIT: f64 = 1e8;
/// Largest accepted condition number of the mass matrix.
pub const MASS_COND_LIMIT: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsMatrices {
    pub m: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub g: DVector<f64>,
}

impl DynamicsMatrices {
    /// `M θ̈ + C θ̇ + g`.
    pub fn generalized_force(&self, theta_dot: &DVector<f64>, theta_ddot: &DVector<f64>) -> DVector<f64> {
        &self.m * theta_ddot + &self.c * theta_dot + &self.g
    }
}

/// Pivot inertia of `body` expressed in the base frame.
pub fn world_inertia(body: &BodyInertia, rotation: &Mat3) -> Mat3 {
    rotation * body.inertia_pivot() * rotation.transpose()
}

/// Assemble `M`, `C` and `g` from already evaluated kinematics.
pub fn matrices_from_kinematics(bodies: &[BodyInertia], gravity: &Vec3, kin: &Kinematics, theta_dot: &DVector<f64>) -> DynamicsMatrices {
    let m_dim = theta_dot.len();
    let mut m = DMatrix::zeros(m_dim, m_dim);
    let mut c = DMatrix::zeros(m_dim, m_dim);
    let mut g = DVector::zeros(m_dim);
    for (body, bk) in bodies.iter().zip(&kin.bodies) {
        let i0 = world_inertia(body, &bk.rotation);
        let j = &bk.jacobian;
        let jt = j.transpose();
        let ij = i0 * j;
        m += &jt * &ij;
        let omega = j * theta_dot;
        c += &jt * (i0 * &bk.jacobian_dot + skew(&omega) * &ij);
        let arm = bk.rotation * body.first_moment();
        g -= &jt * (skew(&arm) * gravity);
    }
    DynamicsMatrices { m, c, g }
}

pub fn dynamics_matrices(model: &dyn SprModel, theta: &DVector<f64>, theta_dot: &DVector<f64>) -> Result<DynamicsMatrices> {
    let kin = eval_kinematics(model, theta, theta_dot)?;
    Ok(matrices_from_kinematics(model.bodies(), &model.gravity(), &kin, theta_dot))
}

pub fn mass_matrix(model: &dyn SprModel, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(dynamics_matrices(model, theta, &DVector::zeros(model.dof()))?.m)
}

pub fn coriolis_matrix(model: &dyn SprModel, theta: &DVector<f64>, theta_dot: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(dynamics_matrices(model, theta, theta_dot)?.c)
}

pub fn gravity_vector(model: &dyn SprModel, theta: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(dynamics_matrices(model, theta, &DVector::zeros(model.dof()))?.g)
}

/// 2-norm condition number; infinite for a singular matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn check_actuator_jacobian(j: &DMatrix<f64>) -> Result<()> {
    let k = condition_number(j);
    if !(k < JACOBIAN_COND_LIMIT) {
        return Err(Error::singular(alloc::format!("actuator Jacobian condition number {k:e}")));
    }
    Ok(())
}

/// Solve `J_ωᵀ τ = n` for the actuator torques.
pub fn torque_from_force(actuator: &DMatrix<f64>, n: &DVector<f64>) -> Result<DVector<f64>> {
    check_actuator_jacobian(actuator)?;
    actuator
        .transpose()
        .lu()
        .solve(n)
        .ok_or_else(|| Error::singular("actuator Jacobian is not invertible"))
}

fn check_len(v: &DVector<f64>, m: usize) -> Result<()> {
    if v.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: v.len() });
    }
    Ok(())
}

/// Actuator torques for a prescribed motion.
///
/// `n_d` is an external moment that assists the actuators:
/// `J_ωᵀ τ = M θ̈ + C θ̇ + g − n_d`.
pub fn inverse_dynamics(
    model: &dyn SprModel,
    theta: &DVector<f64>,
    theta_dot: &DVector<f64>,
    theta_ddot: &DVector<f64>,
    n_d: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    check_len(theta_ddot, model.dof())?;
    let kin = eval_kinematics(model, theta, theta_dot)?;
    let dm = matrices_from_kinematics(model.bodies(), &model.gravity(), &kin, theta_dot);
    let mut n = dm.generalized_force(theta_dot, theta_ddot);
    if let Some(d) = n_d {
        check_len(d, model.dof())?;
        n -= d;
    }
    torque_from_force(&kin.actuator, &n)
}

/// Solve `M x = b` after checking the conditioning of `M`.
pub fn solve_mass(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let k = condition_number(m);
    if !(k < MASS_COND_LIMIT) {
        return Err(Error::singular(alloc::format!("mass matrix condition number {k:e}")));
    }
    m.clone()
        .cholesky()
        .map(|ch| ch.solve(b))
        .ok_or_else(|| Error::singular("mass matrix is not positive definite"))
}

/// `θ̈ = M⁻¹ (J_ωᵀ τ + n_d − C θ̇ − g)`.
pub fn forward_dynamics(
    model: &dyn SprModel,
    theta: &DVector<f64>,
    theta_dot: &DVector<f64>,
    tau: &DVector<f64>,
    n_d: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    check_len(tau, model.dof())?;
    let kin = eval_kinematics(model, theta, theta_dot)?;
    let dm = matrices_from_kinematics(model.bodies(), &model.gravity(), &kin, theta_dot);
    let mut rhs = kin.actuator.transpose() * tau - &dm.c * theta_dot - &dm.g;
    if let Some(d) = n_d {
        check_len(d, model.dof())?;
        rhs += d;
    }
    solve_mass(&dm.m, &rhs)
}

/// `T = ½ Σ ωᵀ ⁰I ω`, summed over bodies.
pub fn kinetic_energy(model: &dyn SprModel, theta: &DVector<f64>, theta_dot: &DVector<f64>) -> Result<f64> {
    let kin = eval_kinematics(model, theta, theta_dot)?;
    let mut t = 0.0;
    for (body, bk) in model.bodies().iter().zip(&kin.bodies) {
        let w = bk.angular_velocity(theta_dot);
        t += 0.5 * w.dot(&(world_inertia(body, &bk.rotation) * w));
    }
    Ok(t)
}

/// `V = −Σ m g₀ᵀ (R ρ)`.
pub fn potential_energy(model: &dyn SprModel, theta: &DVector<f64>) -> Result<f64> {
    model.workspace().check(theta)?;
    let rots = model.body_rotations(theta)?;
    Ok(potential_from_rotations(model.bodies(), &model.gravity(), &rots))
}

pub fn potential_from_rotations(bodies: &[BodyInertia], gravity: &Vec3, rotations: &[Mat3]) -> f64 {
    bodies.iter().zip(rotations).map(|(b, r)| -gravity.dot(&(r * b.first_moment()))).sum()
}

/// One classical RK4 step of `ẋ = f(t, x)`.
pub fn rk4_step<F>(f: &mut F, t: f64, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: ?Sized + FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * dt, &(x + &k1 * (0.5 * dt)))?;
    let k3 = f(t + 0.5 * dt, &(x + &k2 * (0.5 * dt)))?;
    let k4 = f(t + dt, &(x + &k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSample {
    pub t: f64,
    pub theta: DVector<f64>,
    pub theta_dot: DVector<f64>,
    /// Torque the policy commanded at the start of the step.
    pub tau: DVector<f64>,
}

/// An integrated trajectory; `halted` holds the error that stopped it early, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub samples: Vec<RolloutSample>,
    pub halted: Option<Error>,
}

impl Rollout {
    pub fn into_result(self) -> Result<Vec<RolloutSample>> {
        match self.halted {
            Some(e) => Err(e),
            None => Ok(self.samples),
        }
    }
}

/// Number of fixed steps covering `[0, duration]`.
pub fn step_count(dt: f64, duration: f64) -> Result<usize> {
    if !(dt > 0.0) || !(duration >= 0.0) || !dt.is_finite() || !duration.is_finite() {
        return Err(Error::invalid("time step must be positive and duration non-negative"));
    }
    let n = (duration / dt - 1e-9).ceil();
    Ok(n.max(0.0) as usize)
}

/// Integrate the closed loop `θ̈ = forward_dynamics(τ(t, θ, θ̇))` with RK4.
///
/// The torque policy is re-evaluated at every RK4 stage. Samples are recorded at
/// every step, starting at `t = 0`.
pub fn integrate_rk4<P>(
    model: &dyn SprModel,
    theta0: &DVector<f64>,
    theta_dot0: &DVector<f64>,
    mut policy: P,
    dt: f64,
    duration: f64,
) -> Result<Rollout>
where
    P: FnMut(f64, &DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
{
    let m = model.dof();
    check_len(theta0, m)?;
    check_len(theta_dot0, m)?;
    let steps = step_count(dt, duration)?;
    let mut x = DVector::zeros(2 * m);
    x.rows_mut(0, m).copy_from(theta0);
    x.rows_mut(m, m).copy_from(theta_dot0);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut halted = None;
    let mut rhs = |t: f64, x: &DVector<f64>, tau_out: Option<&mut DVector<f64>>| -> Result<DVector<f64>> {
        let th = x.rows(0, m).into_owned();
        let thd = x.rows(m, m).into_owned();
        let tau = policy(t, &th, &thd)?;
        let acc = forward_dynamics(model, &th, &thd, &tau, None)?;
        if let Some(out) = tau_out {
            *out = tau;
        }
        let mut dx = DVector::zeros(2 * m);
        dx.rows_mut(0, m).copy_from(&thd);
        dx.rows_mut(m, m).copy_from(&acc);
        Ok(dx)
    };
    for k in 0..=steps {
        let t = k as f64 * dt;
        let mut tau = DVector::zeros(m);
        if let Err(e) = rhs(t, &x, Some(&mut tau)) {
            halted = Some(e);
            break;
        }
        samples.push(RolloutSample { t, theta: x.rows(0, m).into_owned(), theta_dot: x.rows(m, m).into_owned(), tau });
        if k == steps {
            break;
        }
        match rk4_step(&mut |t, x: &DVector<f64>| rhs(t, x, None), t, &x, dt) {
            Ok(next) => x = next,
            Err(e) => {
                halted = Some(e);
                break;
            }
        }
    }
    Ok(Rollout { samples, halted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BodyKinematics, Workspace};
    use crate::robots::{Diamond, Rrr3};
    use crate::spatial::{central_diff, central_diff5, euler_rate_map, euler_rate_map_dot, rot_x, FD_STEP, FD_STEP_OUTER};
    use alloc::boxed::Box;
    use alloc::vec;
    use nalgebra::Matrix3xX;
    use proptest::prelude::*;

    /// One body held at the identity with `ω = θ̇`.
    struct Spinner {
        bodies: Vec<BodyInertia>,
        ws: Workspace,
    }

    impl SprModel for Spinner {
        fn name(&self) -> &str {
            "spinner"
        }
        fn dof(&self) -> usize {
            3
        }
        fn bodies(&self) -> &[BodyInertia] {
            &self.bodies
        }
        fn gravity(&self) -> Vec3 {
            Vec3::zeros()
        }
        fn workspace(&self) -> &Workspace {
            &self.ws
        }
        fn kinematics(&self, _theta: &DVector<f64>, _td: &DVector<f64>) -> Result<Kinematics> {
            Ok(Kinematics {
                actuator: DMatrix::identity(3, 3),
                actuator_dot: DMatrix::zeros(3, 3),
                bodies: vec![BodyKinematics {
                    rotation: Mat3::identity(),
                    jacobian: Matrix3xX::identity(3),
                    jacobian_dot: Matrix3xX::zeros(3),
                }],
            })
        }
        fn body_rotations(&self, _theta: &DVector<f64>) -> Result<Vec<Mat3>> {
            Ok(vec![Mat3::identity()])
        }
        fn actuator_positions(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(theta.clone())
        }
        fn with_bodies(&self, bodies: Vec<BodyInertia>) -> Result<Box<dyn SprModel>> {
            Ok(Box::new(Spinner { bodies, ws: self.ws.clone() }))
        }
    }

    fn spinner() -> Spinner {
        let i = Mat3::new(2.0, 0.1, 0.0, 0.1, 3.0, 0.2, 0.0, 0.2, 4.0);
        Spinner {
            bodies: vec![BodyInertia::new("b", 1.5, Vec3::new(0.1, 0.2, 0.3), i).unwrap()],
            ws: Workspace { lower: vec![-10.0; 3], upper: vec![10.0; 3], periodic: vec![false; 3], slack: 0.0 },
        }
    }

    #[test]
    fn single_body_mass_is_pivot_inertia() {
        let s = spinner();
        let m = mass_matrix(&s, &DVector::zeros(3)).unwrap();
        let ip = s.bodies[0].inertia_pivot();
        for r in 0..3 {
            for c in 0..3 {
                assert!((m[(r, c)] - ip[(r, c)]).abs() < 1e-15);
            }
        }
    }

    fn diamond_state(phi: f64, gamma: f64) -> DVector<f64> {
        DVector::from_vec(vec![phi, gamma])
    }

    #[test]
    fn zero_rate_has_zero_coriolis() {
        let d = Diamond::aras();
        let c = coriolis_matrix(&d, &diamond_state(0.4, 0.9), &DVector::zeros(2)).unwrap();
        assert_eq!(c.abs().max(), 0.0);
    }

    #[test]
    fn zero_gravity_vector() {
        let d = Diamond::aras();
        let flat = Diamond::new(d.geometry, Diamond::default_bodies(), Vec3::zeros()).unwrap();
        assert_eq!(gravity_vector(&flat, &diamond_state(1.0, 0.5)).unwrap().abs().max(), 0.0);
        assert_eq!(potential_energy(&flat, &diamond_state(1.0, 0.5)).unwrap(), 0.0);
    }

    #[test]
    fn static_pose_needs_gravity_compensation_only() {
        let d = Diamond::aras();
        let th = diamond_state(0.3, 1.0);
        let z = DVector::zeros(2);
        let tau = inverse_dynamics(&d, &th, &z, &z, None).unwrap();
        let kin = d.kinematics(&th, &z).unwrap();
        let g = gravity_vector(&d, &th).unwrap();
        assert!((kin.actuator.transpose() * &tau - g).abs().max() < 1e-14);
        let acc = forward_dynamics(&d, &th, &z, &tau, None).unwrap();
        assert!(acc.abs().max() < 1e-10);
    }

    #[test]
    fn full_disturbance_needs_no_torque() {
        let r = Rrr3::reference();
        let th = DVector::from_vec(vec![0.1, -0.2, 0.05]);
        let td = DVector::from_vec(vec![0.5, 0.3, -0.7]);
        let tdd = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let n = dynamics_matrices(&r, &th, &td).unwrap().generalized_force(&td, &tdd);
        let tau = inverse_dynamics(&r, &th, &td, &tdd, Some(&n)).unwrap();
        assert!(tau.abs().max() < 1e-12);
    }

    #[test]
    fn platform_block_matches_euler_form() {
        // only the platform carries mass: M θ̈ + C θ̇ + g must equal
        // Eᵀ(⁰I ω̇ + S(ω) ⁰I ω − S(m ⁰ρ) g₀) with ω = E θ̇, ω̇ = E θ̈ + Ė θ̇
        let mut bodies = Rrr3::default_bodies();
        for b in bodies.iter_mut().skip(1) {
            *b = b.scaled(0.0);
        }
        let r = Rrr3::reference().with_bodies(bodies).unwrap();
        let th = DVector::from_vec(vec![0.2, -0.25, 0.1]);
        let td = DVector::from_vec(vec![0.4, -0.9, 1.3]);
        let tdd = DVector::from_vec(vec![-3.0, 2.0, 5.0]);
        let n = dynamics_matrices(r.as_ref(), &th, &td).unwrap().generalized_force(&td, &tdd);
        let e = euler_rate_map(th[0], th[1]);
        let ed = euler_rate_map_dot(th[0], th[1], td[0], td[1]);
        let tv = Vec3::new(td[0], td[1], td[2]);
        let w = e * tv;
        let wd = e * Vec3::new(tdd[0], tdd[1], tdd[2]) + ed * tv;
        let rp = r.body_rotations(&th).unwrap()[0];
        let plat = &r.bodies()[0];
        let i0 = world_inertia(plat, &rp);
        let n_ref = e.transpose() * (i0 * wd + skew(&w) * i0 * w - skew(&(rp * plat.first_moment())) * r.gravity());
        for k in 0..3 {
            assert!((n[k] - n_ref[k]).abs() < 1e-14, "{k}: {} vs {}", n[k], n_ref[k]);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        // ẋ = −x·t, x(0) = 1 → x = exp(−t²/2)
        let mut f = |t: f64, x: &DVector<f64>| Ok(x * -t);
        let run = |dt: f64, f: &mut dyn FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>| {
            let mut x = DVector::from_element(1, 1.0);
            let n = (1.0 / dt).round() as usize;
            for k in 0..n {
                x = rk4_step(f, k as f64 * dt, &x, dt).unwrap();
            }
            (x[0] - (-0.5f64).exp()).abs()
        };
        let e1 = run(0.1, &mut f);
        let e2 = run(0.05, &mut f);
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn stationary_without_torque_or_gravity() {
        let d = Diamond::aras();
        let flat = Diamond::new(d.geometry, Diamond::default_bodies(), Vec3::zeros()).unwrap();
        let th = diamond_state(0.2, 0.8);
        let roll = integrate_rk4(&flat, &th, &DVector::zeros(2), |_, _, _| Ok(DVector::zeros(2)), 1e-3, 0.1).unwrap();
        assert!(roll.halted.is_none());
        let last = roll.samples.last().unwrap();
        assert_eq!(last.theta, th);
        assert_eq!(roll.samples.len(), 101);
    }

    #[test]
    fn free_rotation_conserves_energy() {
        let d = Diamond::aras();
        let flat = Diamond::new(d.geometry, Diamond::default_bodies(), Vec3::zeros()).unwrap();
        let th = diamond_state(0.0, 0.8);
        let td = DVector::from_vec(vec![1.0, 0.3]);
        let e0 = kinetic_energy(&flat, &th, &td).unwrap();
        let roll = integrate_rk4(&flat, &th, &td, |_, _, _| Ok(DVector::zeros(2)), 1e-4, 1.0).unwrap();
        assert!(roll.halted.is_none(), "{:?}", roll.halted);
        let last = roll.samples.last().unwrap();
        let e1 = kinetic_energy(&flat, &last.theta, &last.theta_dot).unwrap();
        assert!(((e1 - e0) / e0).abs() < 1e-8, "{e0} -> {e1}");
    }

    #[test]
    fn workspace_exit_halts_with_partial_trace() {
        let d = Diamond::aras();
        // no torque: the arm falls and γ leaves [5°, 85°]
        let th = diamond_state(0.0, 1.4);
        let roll = integrate_rk4(&d, &th, &DVector::from_vec(vec![0.0, 3.0]), |_, _, _| Ok(DVector::zeros(2)), 1e-3, 2.0).unwrap();
        assert!(matches!(roll.halted, Some(Error::WorkspaceViolation { index: 1, .. })));
        assert!(!roll.samples.is_empty() && roll.samples.len() < 2001);
    }

    #[test]
    fn singular_jacobian_is_rejected() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(check_actuator_jacobian(&j), Err(Error::SingularConfiguration(_))));
        assert!(condition_number(&DMatrix::identity(3, 3)) - 1.0 < 1e-15);
    }

    #[test]
    fn body_frame_round_trip() {
        let b = BodyInertia::new("x", 1.0, Vec3::x(), Mat3::identity()).unwrap();
        let r = rot_x(0.3);
        let w = world_inertia(&b, &r);
        assert!((r.transpose() * w * r - b.inertia_pivot()).abs().max() < 1e-15);
    }

    fn diamond_states() -> impl Strategy<Value = (DVector<f64>, DVector<f64>, DVector<f64>)> {
        (0.0..core::f64::consts::TAU, 0.0873..1.483f64, -2.0..2.0f64, -2.0..2.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(
            |(a, b, c, d, e, f)| (DVector::from_vec(vec![a, b]), DVector::from_vec(vec![c, d]), DVector::from_vec(vec![e, f])),
        )
    }

    fn rrr_states() -> impl Strategy<Value = (DVector<f64>, DVector<f64>, DVector<f64>)> {
        let ang = -0.52..0.52f64;
        let rate = -2.0..2.0f64;
        let acc = -10.0..10.0f64;
        (
            (ang.clone(), ang.clone(), ang),
            (rate.clone(), rate.clone(), rate),
            (acc.clone(), acc.clone(), acc),
        )
            .prop_map(|(t, r, a)| {
                (
                    DVector::from_vec(vec![t.0, t.1, t.2]),
                    DVector::from_vec(vec![r.0, r.1, r.2]),
                    DVector::from_vec(vec![a.0, a.1, a.2]),
                )
            })
    }

    fn check_energy_identities(model: &dyn SprModel, th: &DVector<f64>, td: &DVector<f64>, tdd: &DVector<f64>) -> core::result::Result<(), TestCaseError> {
        let dm = dynamics_matrices(model, th, td).unwrap();
        let t_body = kinetic_energy(model, th, td).unwrap();
        let t_quad = 0.5 * td.dot(&(&dm.m * td));
        prop_assert!((t_body - t_quad).abs() < 1e-10);
        prop_assert!((&dm.m - dm.m.transpose()).abs().max() < 1e-12);
        prop_assert!(dm.m.clone().symmetric_eigenvalues().min() > 0.0);
        // g = ∇V
        let n = th.len();
        for k in 0..n {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            let dv = central_diff(|s| potential_energy(model, &(th + &e * s)).unwrap(), 0.0, FD_STEP);
            prop_assert!((dv - dm.g[k]).abs() < 1e-6, "g[{}] {} vs {}", k, dm.g[k], dv);
        }
        // Ṁ − 2C antisymmetric, Ṁ by FD along θ̇
        let m_dot = central_diff5(|s| mass_matrix(model, &(th + td * s)).unwrap(), 0.0, FD_STEP_OUTER * 0.1);
        let a = &m_dot - &dm.c * 2.0;
        let skew_err = (&a + a.transpose()).abs().max();
        prop_assert!(skew_err < 1e-10, "skew {:e} |M| {:e}", skew_err, dm.m.abs().max());
        // forward/inverse round trip
        let tau = inverse_dynamics(model, th, td, tdd, None).unwrap();
        let back = forward_dynamics(model, th, td, &tau, None).unwrap();
        prop_assert!((back - tdd).abs().max() < 1e-9);
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn diamond_energy_identities((th, td, tdd) in diamond_states()) {
            check_energy_identities(&Diamond::aras(), &th, &td, &tdd)?;
        }

        #[test]
        fn rrr_energy_identities((th, td, tdd) in rrr_states()) {
            check_energy_identities(&Rrr3::reference(), &th, &td, &tdd)?;
        }
    }
}
