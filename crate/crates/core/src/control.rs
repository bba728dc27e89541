//! Closed-loop simulations: inverse dynamics control and Slotine-Li adaptive control.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{dynamics_matrices, forward_dynamics, rk4_step, step_count, torque_from_force};
use crate::error::{Error, Result};
use crate::model::{assemble_pi, eval_kinematics, SprModel};
use crate::reduction::ReductionMap;
use crate::regressor::regressor_from_kinematics;
use crate::trajectory::{reference_signals, Path};

pub const DEFAULT_KP: f64 = 100.0;
pub const DEFAULT_KD: f64 = 20.0;
pub const DEFAULT_LAMBDA: f64 = 5.0;
pub const DEFAULT_K: f64 = 50.0;
/// Step for Slotine-Li runs. With `K = 50 I` the sliding dynamics `M ṡ = −K s`
/// are fast against the small platform inertias, and RK4 at 1 ms is unstable.
pub const SL_DT: f64 = 1e-4;

fn check_spd(name: &str, a: &DMatrix<f64>, m: usize) -> Result<()> {
    if a.shape() != (m, m) {
        return Err(Error::DimensionMismatch { expected: m, got: a.nrows() });
    }
    let asym = (a - a.transpose()).abs().max();
    if asym > 1e-12 * a.abs().max().max(1.0) || a.clone().cholesky().is_none() {
        return Err(Error::invalid(alloc::format!("{name} must be symmetric positive definite")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdcGains {
    pub kp: DMatrix<f64>,
    pub kd: DMatrix<f64>,
}

impl IdcGains {
    pub fn diagonal(m: usize, kp: f64, kd: f64) -> Self {
        IdcGains { kp: DMatrix::identity(m, m) * kp, kd: DMatrix::identity(m, m) * kd }
    }

    pub fn default_for(model: &dyn SprModel) -> Self {
        Self::diagonal(model.dof(), DEFAULT_KP, DEFAULT_KD)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotineLiGains {
    pub lambda: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Adaptation gain over the full parameter vector.
    pub gamma: DMatrix<f64>,
}

/// Adaptation gain weighting each body's nine parameters `[m ρ | Ī]`.
///
/// First moments and pivot inertias differ by about an order of magnitude in
/// both shipped robots; the inertia terms get the smaller gain.
pub fn default_gamma(model: &dyn SprModel) -> DMatrix<f64> {
    let (g_moment, g_inertia) = match model.name() {
        "diamond" => (0.05, 0.005),
        _ => (0.02, 0.002),
    };
    let n = model.param_count();
    DMatrix::from_fn(n, n, |i, j| if i != j { 0.0 } else if i % 9 < 3 { g_moment } else { g_inertia })
}

impl SlotineLiGains {
    pub fn default_for(model: &dyn SprModel) -> Self {
        let m = model.dof();
        SlotineLiGains {
            lambda: DMatrix::identity(m, m) * DEFAULT_LAMBDA,
            k: DMatrix::identity(m, m) * DEFAULT_K,
            gamma: default_gamma(model),
        }
    }
}

/// Sampled closed-loop run. Arrays share the sample index; `pi_hat` and
/// `lyapunov` are empty for controllers without adaptation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub controller: String,
    pub t: Vec<f64>,
    pub theta: Vec<DVector<f64>>,
    pub theta_dot: Vec<DVector<f64>>,
    pub theta_desired: Vec<DVector<f64>>,
    pub e: Vec<DVector<f64>>,
    pub s: Vec<DVector<f64>>,
    pub tau: Vec<DVector<f64>>,
    pub pi_hat: Vec<DVector<f64>>,
    /// True parameters in the same coordinates as `pi_hat`.
    pub pi_true: Option<DVector<f64>>,
    pub lyapunov: Vec<f64>,
    pub halted: Option<Error>,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Root mean square of `‖e‖` over samples with `t ∈ [from, to]`.
    pub fn windowed_rms(&self, from: f64, to: f64) -> f64 {
        let (mut acc, mut n) = (0.0, 0usize);
        for (t, e) in self.t.iter().zip(&self.e) {
            if *t >= from - 1e-12 && *t <= to + 1e-12 {
                acc += e.norm_squared();
                n += 1;
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            (acc / n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunMetrics {
    pub rmse: f64,
    pub terminal_error: f64,
    pub torque_peak: f64,
    pub parameter_error: Option<f64>,
}

pub fn run_metrics(record: &RunRecord) -> RunMetrics {
    let n = record.e.len().max(1) as f64;
    let rmse = (record.e.iter().map(|e| e.norm_squared()).sum::<f64>() / n).sqrt();
    let terminal_error = record.e.last().map_or(0.0, |e| e.norm());
    let torque_peak = record.tau.iter().map(|t| t.abs().max()).fold(0.0, f64::max);
    let parameter_error = match (&record.pi_true, record.pi_hat.last()) {
        (Some(p), Some(h)) => Some((h - p).norm()),
        _ => None,
    };
    RunMetrics { rmse, terminal_error, torque_peak, parameter_error }
}

/// Initial state; defaults to the desired state at `t = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialState {
    pub theta: Option<DVector<f64>>,
    pub theta_dot: Option<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
}

struct LoopSample {
    t: f64,
    theta: DVector<f64>,
    theta_dot: DVector<f64>,
    extra: DVector<f64>,
    tau: DVector<f64>,
}

/// RK4 over `[θ, θ̇, extra]`, where `law` returns the torques and the time
/// derivative of `extra`.
fn run_loop<L>(
    model: &dyn SprModel,
    theta0: DVector<f64>,
    theta_dot0: DVector<f64>,
    extra0: DVector<f64>,
    mut law: L,
    cfg: SimConfig,
) -> Result<(Vec<LoopSample>, Option<Error>)>
where
    L: FnMut(f64, &DVector<f64>, &DVector<f64>, &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)>,
{
    let m = model.dof();
    let q = extra0.len();
    for v in [&theta0, &theta_dot0] {
        if v.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: v.len() });
        }
    }
    let steps = step_count(cfg.dt, cfg.duration)?;
    let mut x = DVector::zeros(2 * m + q);
    x.rows_mut(0, m).copy_from(&theta0);
    x.rows_mut(m, m).copy_from(&theta_dot0);
    x.rows_mut(2 * m, q).copy_from(&extra0);
    let split = |x: &DVector<f64>| (x.rows(0, m).into_owned(), x.rows(m, m).into_owned(), x.rows(2 * m, q).into_owned());
    let mut rhs = |t: f64, x: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        let (th, thd, ex) = split(x);
        let (tau, ex_dot) = law(t, &th, &thd, &ex)?;
        let acc = forward_dynamics(model, &th, &thd, &tau, None)?;
        let mut dx = DVector::zeros(2 * m + q);
        dx.rows_mut(0, m).copy_from(&thd);
        dx.rows_mut(m, m).copy_from(&acc);
        dx.rows_mut(2 * m, q).copy_from(&ex_dot);
        Ok((dx, tau))
    };
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let tau = match rhs(t, &x) {
            Ok((_, tau)) => tau,
            Err(e) => return Ok((out, Some(e))),
        };
        let (theta, theta_dot, extra) = split(&x);
        out.push(LoopSample { t, theta, theta_dot, extra, tau });
        if k == steps {
            break;
        }
        match rk4_step(&mut |t, x: &DVector<f64>| rhs(t, x).map(|r| r.0), t, &x, cfg.dt) {
            Ok(next) => x = next,
            Err(e) => return Ok((out, Some(e))),
        }
    }
    Ok((out, None))
}

fn initial(init: &InitialState, desired: &Path) -> (DVector<f64>, DVector<f64>) {
    let d0 = desired.eval(0.0);
    (init.theta.clone().unwrap_or(d0.theta), init.theta_dot.clone().unwrap_or(d0.theta_dot))
}

/// Inverse dynamics control with the controller's parameter copy scaled by
/// `1 + mismatch`:
/// `τ = J_ω⁻ᵀ (M̂ (θ̈_d − Kd ė − Kp e) + Ĉ θ̇ + ĝ)`.
///
/// `s` is recorded with `Λ = Kd⁻¹ Kp`.
pub fn simulate_idc(
    model: &dyn SprModel,
    desired: &Path,
    gains: &IdcGains,
    mismatch: f64,
    init: &InitialState,
    cfg: SimConfig,
) -> Result<RunRecord> {
    let m = model.dof();
    check_psd_or_zero("Kp", &gains.kp, m)?;
    check_psd_or_zero("Kd", &gains.kd, m)?;
    if !(1.0 + mismatch > 0.0) {
        return Err(Error::invalid("model mismatch must keep parameters positive"));
    }
    let ctrl = model.with_bodies(model.bodies().iter().map(|b| b.scaled(1.0 + mismatch)).collect())?;
    let (theta0, theta_dot0) = initial(init, desired);
    let law = |t: f64, th: &DVector<f64>, thd: &DVector<f64>, _: &DVector<f64>| {
        let d = desired.eval(t);
        let e = th - &d.theta;
        let ed = thd - &d.theta_dot;
        let kin = eval_kinematics(ctrl.as_ref(), th, thd)?;
        let dm = crate::dynamics::matrices_from_kinematics(ctrl.bodies(), &ctrl.gravity(), &kin, thd);
        let a = &d.theta_ddot - &gains.kd * ed - &gains.kp * e;
        let n = &dm.m * a + &dm.c * thd + &dm.g;
        Ok((torque_from_force(&kin.actuator, &n)?, DVector::zeros(0)))
    };
    let (samples, halted) = run_loop(model, theta0, theta_dot0, DVector::zeros(0), law, cfg)?;
    let lambda = gains.kd.clone().try_inverse().map_or_else(|| DMatrix::zeros(m, m), |kdi| kdi * &gains.kp);
    Ok(assemble_record("idc", desired, &lambda, samples, None, halted, |_, _, _| None))
}

// The zero-gain open-loop case is allowed for IDC.
fn check_psd_or_zero(name: &str, a: &DMatrix<f64>, m: usize) -> Result<()> {
    if a.shape() == (m, m) && a.abs().max() == 0.0 {
        return Ok(());
    }
    check_spd(name, a, m)
}

fn assemble_record<F>(
    controller: &str,
    desired: &Path,
    lambda: &DMatrix<f64>,
    samples: Vec<LoopSample>,
    pi_true: Option<DVector<f64>>,
    halted: Option<Error>,
    mut lyapunov: F,
) -> RunRecord
where
    F: FnMut(&LoopSample, &DVector<f64>, &DVector<f64>) -> Option<f64>,
{
    let mut rec = RunRecord {
        controller: controller.into(),
        t: Vec::new(),
        theta: Vec::new(),
        theta_dot: Vec::new(),
        theta_desired: Vec::new(),
        e: Vec::new(),
        s: Vec::new(),
        tau: Vec::new(),
        pi_hat: Vec::new(),
        pi_true,
        lyapunov: Vec::new(),
        halted,
    };
    for smp in samples {
        let d = desired.eval(smp.t);
        let r = reference_signals(&d, &smp.theta, &smp.theta_dot, lambda);
        if let Some(v) = lyapunov(&smp, &r.s, &smp.extra) {
            rec.lyapunov.push(v);
        }
        rec.t.push(smp.t);
        rec.theta_desired.push(d.theta);
        rec.e.push(r.e);
        rec.s.push(r.s);
        rec.tau.push(smp.tau);
        if !smp.extra.is_empty() {
            rec.pi_hat.push(smp.extra);
        }
        rec.theta.push(smp.theta);
        rec.theta_dot.push(smp.theta_dot);
    }
    rec
}

/// Slotine-Li adaptive control:
/// `τ = J_ω⁻ᵀ (Y_S π̂ − K s)`, `π̂̇ = −Γ Y_Sᵀ s`, integrated with the state.
///
/// `pi_hat0` is a full parameter vector. With a reduction map the run uses
/// `Y_S B†`, `B π̂₀` and `B Γ Bᵀ`, which yields the same torques as the full run
/// provided the map was built from `[Y; Y_S]` rows
/// (see [`crate::regressor::slotine_li_observation_matrix`]).
pub fn simulate_slotine_li(
    model: &dyn SprModel,
    desired: &Path,
    gains: &SlotineLiGains,
    pi_hat0: &DVector<f64>,
    reduction: Option<&ReductionMap>,
    init: &InitialState,
    cfg: SimConfig,
) -> Result<RunRecord> {
    let m = model.dof();
    let n = model.param_count();
    check_spd("Lambda", &gains.lambda, m)?;
    check_spd("K", &gains.k, m)?;
    check_spd("Gamma", &gains.gamma, n)?;
    if pi_hat0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pi_hat0.len() });
    }
    let pi_full = assemble_pi(model).0;
    let (pi0, gamma, pi_true) = match reduction {
        Some(map) => (map.reduce_pi(pi_hat0)?, map.reduce_gain(&gains.gamma)?, map.reduce_pi(&pi_full)?),
        None => (pi_hat0.clone(), gains.gamma.clone(), pi_full),
    };
    let gamma_inv = gamma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("reduced adaptation gain is not positive definite"))?
        .inverse();
    let gravity = model.gravity();
    let (theta0, theta_dot0) = initial(init, desired);
    let law = |t: f64, th: &DVector<f64>, thd: &DVector<f64>, pi_hat: &DVector<f64>| {
        let r = reference_signals(&desired.eval(t), th, thd, &gains.lambda);
        let kin = eval_kinematics(model, th, thd)?;
        let mut y = regressor_from_kinematics(&kin, &gravity, thd, &r.theta_dot_ref, &r.theta_ddot_ref);
        if let Some(map) = reduction {
            y = map.reduce(&y)?;
        }
        let nf = &y * pi_hat - &gains.k * &r.s;
        let tau = torque_from_force(&kin.actuator, &nf)?;
        Ok((tau, -(&gamma * (y.transpose() * &r.s))))
    };
    let (samples, halted) = run_loop(model, theta0, theta_dot0, pi0, law, cfg)?;
    let name = if reduction.is_some() { "slotine-li-reduced" } else { "slotine-li" };
    let pt = pi_true.clone();
    Ok(assemble_record(name, desired, &gains.lambda, samples, Some(pi_true), halted, |smp, s, pi_hat| {
        let mm = dynamics_matrices(model, &smp.theta, &smp.theta_dot).ok()?.m;
        let err = pi_hat - &pt;
        Some(0.5 * s.dot(&(&mm * s)) + 0.5 * err.dot(&(&gamma_inv * &err)))
    }))
}
