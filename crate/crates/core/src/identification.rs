//! Base-parameter identification from task-space moment measurements.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::{condition_number, inverse_dynamics};
use crate::error::{Error, Result};
use crate::model::{assemble_pi, eval_kinematics, SprModel};
use crate::reduction::ReductionMap;
use crate::regressor::linear_regressor;
use crate::trajectory::{Multisine, Trajectory};

/// Least-squares problems above this condition number are rejected.
pub const LS_COND_LIMIT: f64 = 1e10;

/// Stacked reduced regressor rows and measured moments `n = J_ωᵀ τ + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub w_r: DMatrix<f64>,
    pub n_meas: DVector<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub samples: usize,
}

/// Simulated measurements along `traj`: torques from inverse dynamics, mapped back
/// through `J_ωᵀ`, plus per-component Gaussian noise of standard deviation `sigma`.
pub fn synthesize_measurements(
    model: &dyn SprModel,
    traj: &Trajectory,
    map: &ReductionMap,
    sigma: f64,
    seed: u64,
) -> Result<Measurements> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("noise sigma must be finite and non-negative"));
    }
    traj.check_workspace(model.workspace())?;
    let m = model.dof();
    let p = map.rank();
    let mut w_r = DMatrix::zeros(traj.len() * m, p);
    let mut n_meas = DVector::zeros(traj.len() * m);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::invalid(alloc::format!("{e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..traj.len() {
        let s = traj.sample(k);
        let tau = inverse_dynamics(model, &s.theta, &s.theta_dot, &s.theta_ddot, None)?;
        let kin = eval_kinematics(model, &s.theta, &s.theta_dot)?;
        let n = kin.actuator.transpose() * tau;
        let y = linear_regressor(model, &s.theta, &s.theta_dot, &s.theta_ddot)?;
        w_r.view_mut((k * m, 0), (m, p)).copy_from(&map.reduce(&y)?);
        for i in 0..m {
            n_meas[k * m + i] = n[i] + if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        }
    }
    Ok(Measurements { w_r, n_meas, sigma, seed, samples: traj.len() })
}

/// Measurements from recorded task-space states and actuator torques.
pub fn measurements_from_torques(
    model: &dyn SprModel,
    states: &[crate::trajectory::StateSample],
    torques: &[DVector<f64>],
    map: &ReductionMap,
) -> Result<Measurements> {
    if states.len() != torques.len() {
        return Err(Error::DimensionMismatch { expected: states.len(), got: torques.len() });
    }
    let m = model.dof();
    let p = map.rank();
    let mut w_r = DMatrix::zeros(states.len() * m, p);
    let mut n_meas = DVector::zeros(states.len() * m);
    for (k, (s, tau)) in states.iter().zip(torques).enumerate() {
        if tau.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: tau.len() });
        }
        let kin = eval_kinematics(model, &s.theta, &s.theta_dot)?;
        n_meas.rows_mut(k * m, m).copy_from(&(kin.actuator.transpose() * tau));
        let y = linear_regressor(model, &s.theta, &s.theta_dot, &s.theta_ddot)?;
        w_r.view_mut((k * m, 0), (m, p)).copy_from(&map.reduce(&y)?);
    }
    Ok(Measurements { w_r, n_meas, sigma: 0.0, seed: 0, samples: states.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseEstimate {
    pub pi_r: DVector<f64>,
    /// `‖W_r π̂_r − n‖₂`.
    pub residual: f64,
    pub condition: f64,
}

/// Least squares by Householder QR.
pub fn solve_base_params(w_r: &DMatrix<f64>, n_meas: &DVector<f64>) -> Result<BaseEstimate> {
    let (rows, p) = w_r.shape();
    if n_meas.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, got: n_meas.len() });
    }
    if rows < p {
        return Err(Error::InsufficientSamples { rows, params: p });
    }
    let condition = condition_number(w_r);
    if !(condition <= LS_COND_LIMIT) {
        return Err(Error::RankDeficient(condition));
    }
    let qr = w_r.clone().qr();
    let rhs = qr.q().transpose() * n_meas;
    let pi_r = qr.r().solve_upper_triangular(&rhs).ok_or(Error::RankDeficient(condition))?;
    let residual = (w_r * &pi_r - n_meas).norm();
    Ok(BaseEstimate { pi_r, residual, condition })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoveryRow {
    /// Full-parameter column this base parameter is pivoted on.
    pub pivot: usize,
    pub truth: f64,
    pub estimate: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoveryReport {
    pub robot: String,
    pub rows: Vec<RecoveryRow>,
    /// `‖π̂_r − B π‖ / ‖B π‖`.
    pub rel_err_norm: f64,
    pub max_rel_err: f64,
    pub condition: f64,
    pub residual: f64,
}

/// Compare an estimate with `B · assemble_pi(model)`.
///
/// Per-parameter errors are relative to `max(|truth_i|, 1e-3 · max|truth|)` so
/// that base parameters that vanish for the true model do not divide by zero.
pub fn recovery_report(estimate: &BaseEstimate, model: &dyn SprModel, map: &ReductionMap) -> Result<RecoveryReport> {
    let truth = map.reduce_pi(&assemble_pi(model).0)?;
    if estimate.pi_r.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: estimate.pi_r.len() });
    }
    let floor = 1e-3 * truth.abs().max();
    let rows: Vec<RecoveryRow> = truth
        .iter()
        .zip(estimate.pi_r.iter())
        .zip(&map.pivots)
        .map(|((&t, &e), &pivot)| RecoveryRow { pivot, truth: t, estimate: e, rel_err: (e - t).abs() / t.abs().max(floor) })
        .collect();
    let max_rel_err = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    Ok(RecoveryReport {
        robot: model.name().into(),
        rows,
        rel_err_norm: (&estimate.pi_r - &truth).norm() / truth.norm(),
        max_rel_err,
        condition: estimate.condition,
        residual: estimate.residual,
    })
}

/// Periodic excitation inside the model's workspace.
///
/// Coordinate `i` carries two harmonics of a 0.25 Hz fundamental, at `i + 1` and
/// `2i + 4` times the fundamental, so no two coordinates share a frequency.
/// Bounded coordinates swing over 80% of their half-range; periodic ones by ±90°.
pub fn default_excitation(model: &dyn SprModel) -> Multisine {
    let ws = model.workspace();
    let f0 = 0.25;
    let m = model.dof();
    let mut center = DVector::zeros(m);
    let (mut amps, mut freqs, mut phases) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..m {
        let mid = 0.5 * (ws.lower[i] + ws.upper[i]);
        let reach = if ws.periodic[i] { core::f64::consts::FRAC_PI_2 } else { 0.4 * (ws.upper[i] - ws.lower[i]) };
        center[i] = mid;
        amps.push(vec![0.6 * reach, 0.4 * reach]);
        freqs.push(vec![f0 * (i + 1) as f64, f0 * (2 * i + 4) as f64]);
        phases.push(vec![0.3 * i as f64, 1.0 + 0.7 * i as f64]);
    }
    Multisine::new(center, amps, freqs, phases, 4.0).expect("excitation tables are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::DEFAULT_RREF_TOL;
    use crate::regressor::random_observation_matrix;
    use crate::robots::{Diamond, Rrr3};
    use crate::trajectory::multisine_trajectory;
    use alloc::boxed::Box;

    fn setup(model: &dyn SprModel, rate: f64) -> (ReductionMap, Trajectory) {
        let obs = random_observation_matrix(model, 60, 7).unwrap();
        let map = ReductionMap::from_observation(&obs.w, DEFAULT_RREF_TOL).unwrap();
        let traj = multisine_trajectory(default_excitation(model), rate, model.workspace()).unwrap();
        (map, traj)
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let models: [Box<dyn SprModel>; 2] = [Box::new(Diamond::aras()), Box::new(Rrr3::reference())];
        for model in &models {
            let (map, traj) = setup(model.as_ref(), 100.0);
            let meas = synthesize_measurements(model.as_ref(), &traj, &map, 0.0, 1).unwrap();
            let est = solve_base_params(&meas.w_r, &meas.n_meas).unwrap();
            let rep = recovery_report(&est, model.as_ref(), &map).unwrap();
            assert_eq!(rep.rows.len(), map.rank());
            assert!(rep.rel_err_norm < 1e-8, "{} {}", model.name(), rep.rel_err_norm);
            assert!(rep.max_rel_err < 1e-8, "{} {}", model.name(), rep.max_rel_err);
        }
    }

    #[test]
    fn residual_matches_chi_square_expectation() {
        let model = Diamond::aras();
        let (map, traj) = setup(&model, 100.0);
        let sigma = 0.01;
        let meas = synthesize_measurements(&model, &traj, &map, sigma, 3).unwrap();
        let est = solve_base_params(&meas.w_r, &meas.n_meas).unwrap();
        let expected = sigma * ((meas.w_r.nrows() - map.rank()) as f64).sqrt();
        assert!(est.residual > 0.5 * expected && est.residual < 2.0 * expected, "{} vs {expected}", est.residual);
        assert_eq!(meas, synthesize_measurements(&model, &traj, &map, sigma, 3).unwrap());
    }

    #[test]
    fn recorded_torques_match_synthesis() {
        let model = Diamond::aras();
        let (map, traj) = setup(&model, 50.0);
        let states: Vec<_> = (0..traj.len()).map(|k| traj.sample(k)).collect();
        let torques: Vec<_> =
            states.iter().map(|s| inverse_dynamics(&model, &s.theta, &s.theta_dot, &s.theta_ddot, None).unwrap()).collect();
        let a = measurements_from_torques(&model, &states, &torques, &map).unwrap();
        let b = synthesize_measurements(&model, &traj, &map, 0.0, 0).unwrap();
        assert_eq!(a.w_r, b.w_r);
        assert!((a.n_meas - b.n_meas).abs().max() < 1e-12);
    }

    #[test]
    fn duplicate_rows_leave_solution() {
        let model = Rrr3::reference();
        let (map, traj) = setup(&model, 50.0);
        let meas = synthesize_measurements(&model, &traj, &map, 0.01, 5).unwrap();
        let a = solve_base_params(&meas.w_r, &meas.n_meas).unwrap();
        let (r, p) = meas.w_r.shape();
        let mut w2 = DMatrix::zeros(2 * r, p);
        w2.rows_mut(0, r).copy_from(&meas.w_r);
        w2.rows_mut(r, r).copy_from(&meas.w_r);
        let mut n2 = DVector::zeros(2 * r);
        n2.rows_mut(0, r).copy_from(&meas.n_meas);
        n2.rows_mut(r, r).copy_from(&meas.n_meas);
        let b = solve_base_params(&w2, &n2).unwrap();
        assert!((a.pi_r - b.pi_r).abs().max() < 1e-10);
    }

    #[test]
    fn scaling_the_model_scales_the_estimate() {
        let model = Diamond::aras();
        let (map, traj) = setup(&model, 50.0);
        let scaled = model.with_bodies(model.bodies().iter().map(|b| b.scaled(3.0)).collect()).unwrap();
        let ma = synthesize_measurements(&model, &traj, &map, 0.0, 0).unwrap();
        let a = solve_base_params(&ma.w_r, &ma.n_meas).unwrap();
        let ms = synthesize_measurements(scaled.as_ref(), &traj, &map, 0.0, 0).unwrap();
        let b = solve_base_params(&ms.w_r, &ms.n_meas).unwrap();
        assert!((a.pi_r * 3.0 - &b.pi_r).abs().max() < 1e-9 * b.pi_r.abs().max());
    }

    #[test]
    fn rank_deficient_and_short_systems() {
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let n = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(solve_base_params(&w, &n), Err(Error::RankDeficient(_))));
        let w = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(solve_base_params(&w, &DVector::from_vec(vec![1.0])), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn excitation_stays_inside_workspace() {
        for model in [Box::new(Diamond::aras()) as Box<dyn SprModel>, Box::new(Rrr3::reference())] {
            assert!(multisine_trajectory(default_excitation(model.as_ref()), 1000.0, model.workspace()).is_ok());
        }
    }
}
