//! Analytic task-space trajectories, seeded random state streams and the
//! reference signals used by the Slotine-Li regressor.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{SprModel, Workspace};

/// Sample rate used when none is given.
pub const DEFAULT_RATE_HZ: f64 = 1000.0;
/// Bound on sampled task rates, rad/s.
pub const RATE_BOUND: f64 = 2.0;
/// Bound on sampled task accelerations, rad/s².
pub const ACCEL_BOUND: f64 = 10.0;

/// Position, velocity and acceleration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSample {
    pub theta: DVector<f64>,
    pub theta_dot: DVector<f64>,
    pub theta_ddot: DVector<f64>,
}

/// Rest-to-rest cubic blend `θ0 + (3τ² − 2τ³)(θf − θ0)`, `τ = t/T`.
///
/// Evaluation is not clamped to `[0, T]`; the polynomial simply continues.
#[derive(Debug, Clone, PartialEq)]
pub struct Cubic {
    pub from: DVector<f64>,
    pub to: DVector<f64>,
    pub duration: f64,
}

impl Cubic {
    pub fn new(from: DVector<f64>, to: DVector<f64>, duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::invalid("cubic duration must be positive"));
        }
        if from.len() != to.len() {
            return Err(Error::DimensionMismatch { expected: from.len(), got: to.len() });
        }
        Ok(Cubic { from, to, duration })
    }

    pub fn eval(&self, t: f64) -> StateSample {
        let tt = self.duration;
        let s = t / tt;
        let delta = &self.to - &self.from;
        let blend = 3.0 * s * s - 2.0 * s * s * s;
        let rate = (6.0 * s - 6.0 * s * s) / tt;
        let acc = (6.0 - 12.0 * s) / (tt * tt);
        StateSample { theta: &self.from + &delta * blend, theta_dot: &delta * rate, theta_ddot: delta * acc }
    }
}

/// Per-coordinate sum of sinusoids `c_i + Σ_k a_ik sin(2π f_ik t + φ_ik)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multisine {
    pub center: DVector<f64>,
    /// `amplitudes[i][k]`, rad.
    pub amplitudes: Vec<Vec<f64>>,
    /// `frequencies[i][k]`, Hz.
    pub frequencies: Vec<Vec<f64>>,
    /// `phases[i][k]`, rad.
    pub phases: Vec<Vec<f64>>,
    pub duration: f64,
}

impl Multisine {
    pub fn new(
        center: DVector<f64>,
        amplitudes: Vec<Vec<f64>>,
        frequencies: Vec<Vec<f64>>,
        phases: Vec<Vec<f64>>,
        duration: f64,
    ) -> Result<Self> {
        let m = center.len();
        for table in [&amplitudes, &frequencies, &phases] {
            if table.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: table.len() });
            }
        }
        for i in 0..m {
            let n = amplitudes[i].len();
            if frequencies[i].len() != n || phases[i].len() != n {
                return Err(Error::invalid(alloc::format!("multisine coordinate {i}: term tables differ in length")));
            }
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::invalid("multisine duration must be positive"));
        }
        Ok(Multisine { center, amplitudes, frequencies, phases, duration })
    }

    pub fn eval(&self, t: f64) -> StateSample {
        let m = self.center.len();
        let mut out =
            StateSample { theta: self.center.clone(), theta_dot: DVector::zeros(m), theta_ddot: DVector::zeros(m) };
        let tau = core::f64::consts::TAU;
        for i in 0..m {
            for k in 0..self.amplitudes[i].len() {
                let a = self.amplitudes[i][k];
                let w = tau * self.frequencies[i][k];
                let (s, c) = (w * t + self.phases[i][k]).sin_cos();
                out.theta[i] += a * s;
                out.theta_dot[i] += a * w * c;
                out.theta_ddot[i] -= a * w * w * s;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Path {
    Cubic(Cubic),
    Multisine(Multisine),
}

impl Path {
    pub fn eval(&self, t: f64) -> StateSample {
        match self {
            Path::Cubic(c) => c.eval(t),
            Path::Multisine(m) => m.eval(t),
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            Path::Cubic(c) => c.duration,
            Path::Multisine(m) => m.duration,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Path::Cubic(_) => "cubic",
            Path::Multisine(_) => "multisine",
        }
    }
}

/// A sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: String,
    pub seed: Option<u64>,
    pub t: Vec<f64>,
    pub theta: Vec<DVector<f64>>,
    pub theta_dot: Vec<DVector<f64>>,
    pub theta_ddot: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn sample(&self, k: usize) -> StateSample {
        StateSample { theta: self.theta[k].clone(), theta_dot: self.theta_dot[k].clone(), theta_ddot: self.theta_ddot[k].clone() }
    }

    /// Every position lies in `ws`, or the first offending one is reported.
    pub fn check_workspace(&self, ws: &Workspace) -> Result<()> {
        self.theta.iter().try_for_each(|th| ws.check(th))
    }
}

/// Sample times `0, 1/rate, …` up to and including `duration`.
pub fn sample_times(duration: f64, rate_hz: f64) -> Result<Vec<f64>> {
    if !(rate_hz > 0.0) || !rate_hz.is_finite() || !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::invalid("rate must be positive and duration non-negative"));
    }
    let n = (duration * rate_hz + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| k as f64 / rate_hz).collect())
}

pub fn sample_path(path: &Path, rate_hz: f64) -> Result<Trajectory> {
    let t = sample_times(path.duration(), rate_hz)?;
    let mut traj = Trajectory {
        kind: path.kind().into(),
        seed: None,
        t: Vec::with_capacity(t.len()),
        theta: Vec::with_capacity(t.len()),
        theta_dot: Vec::with_capacity(t.len()),
        theta_ddot: Vec::with_capacity(t.len()),
    };
    for &tk in &t {
        let s = path.eval(tk);
        traj.t.push(tk);
        traj.theta.push(s.theta);
        traj.theta_dot.push(s.theta_dot);
        traj.theta_ddot.push(s.theta_ddot);
    }
    Ok(traj)
}

pub fn cubic_trajectory(from: DVector<f64>, to: DVector<f64>, duration: f64, rate_hz: f64) -> Result<Trajectory> {
    sample_path(&Path::Cubic(Cubic::new(from, to, duration)?), rate_hz)
}

/// Sampled multisine, rejected if any sample leaves `ws`.
pub fn multisine_trajectory(ms: Multisine, rate_hz: f64, ws: &Workspace) -> Result<Trajectory> {
    let traj = sample_path(&Path::Multisine(ms), rate_hz)?;
    traj.check_workspace(ws)?;
    Ok(traj)
}

/// Seeded stream of random states, uniform in the workspace box and the rate bounds.
#[derive(Debug, Clone)]
pub struct StateSampler {
    rng: ChaCha8Rng,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pub rate_bound: f64,
    pub accel_bound: f64,
}

impl StateSampler {
    pub fn new(ws: &Workspace, seed: u64) -> Self {
        StateSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            lower: ws.lower.clone(),
            upper: ws.upper.clone(),
            rate_bound: RATE_BOUND,
            accel_bound: ACCEL_BOUND,
        }
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }
}

impl Iterator for StateSampler {
    type Item = StateSample;

    fn next(&mut self) -> Option<StateSample> {
        let m = self.lower.len();
        let theta = DVector::from_fn(m, |i, _| {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            self.uniform(lo, hi)
        });
        let (rb, ab) = (self.rate_bound, self.accel_bound);
        let theta_dot = DVector::from_fn(m, |_, _| self.uniform(-rb, rb));
        let theta_ddot = DVector::from_fn(m, |_, _| self.uniform(-ab, ab));
        Some(StateSample { theta, theta_dot, theta_ddot })
    }
}

pub fn random_state_sampler(model: &dyn SprModel, seed: u64) -> StateSampler {
    StateSampler::new(model.workspace(), seed)
}

/// `n` random states laid out as a trajectory at `rate_hz`; the states are independent.
pub fn random_trajectory(model: &dyn SprModel, seed: u64, n: usize, rate_hz: f64) -> Trajectory {
    let mut traj = Trajectory { kind: "random".into(), seed: Some(seed), t: Vec::new(), theta: Vec::new(), theta_dot: Vec::new(), theta_ddot: Vec::new() };
    for (k, s) in random_state_sampler(model, seed).take(n).enumerate() {
        traj.t.push(k as f64 / rate_hz);
        traj.theta.push(s.theta);
        traj.theta_dot.push(s.theta_dot);
        traj.theta_ddot.push(s.theta_ddot);
    }
    traj
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignals {
    /// `e = θ − θ_d`.
    pub e: DVector<f64>,
    pub e_dot: DVector<f64>,
    pub theta_dot_ref: DVector<f64>,
    pub theta_ddot_ref: DVector<f64>,
    /// `s = ė + Λ e = θ̇ − θ̇ᵣ`.
    pub s: DVector<f64>,
}

/// Reference signals at one instant from the desired state and the measured `θ`, `θ̇`.
pub fn reference_signals(desired: &StateSample, theta: &DVector<f64>, theta_dot: &DVector<f64>, lambda: &DMatrix<f64>) -> ReferenceSignals {
    let e = theta - &desired.theta;
    let e_dot = theta_dot - &desired.theta_dot;
    let theta_dot_ref = &desired.theta_dot - lambda * &e;
    let theta_ddot_ref = &desired.theta_ddot - lambda * &e_dot;
    let s = &e_dot + lambda * &e;
    ReferenceSignals { e, e_dot, theta_dot_ref, theta_ddot_ref, s }
}

/// Reference signals along a whole trajectory against measured positions and rates.
pub fn reference_trace(
    desired: &Trajectory,
    theta: &[DVector<f64>],
    theta_dot: &[DVector<f64>],
    lambda: &DMatrix<f64>,
) -> Result<Vec<ReferenceSignals>> {
    if theta.len() != desired.len() || theta_dot.len() != desired.len() {
        return Err(Error::DimensionMismatch { expected: desired.len(), got: theta.len().min(theta_dot.len()) });
    }
    Ok((0..desired.len()).map(|k| reference_signals(&desired.sample(k), &theta[k], &theta_dot[k], lambda)).collect())
}
