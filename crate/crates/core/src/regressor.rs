//! Slotine-Li and linear regressors, linear in the stacked parameters `π`.
//!
//! Per body the nine columns are `[m ρ (3) | Ī (6)]`, with `Ī` the pivot inertia in
//! `[xx, xy, xz, yy, yz, zz]` order, and the block is
//! `Jwᵀ R [S(ᵇg₀) | Ĩ(ᵇω̇ᵣ) + S(ᵇω) Ĩ(ᵇωᵣ)]`, all body-frame vectors being `Rᵀ` times
//! their base-frame counterparts.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3x6};

use crate::error::{Error, Result};
use crate::model::{eval_kinematics, Kinematics, SprModel};
use crate::spatial::{inertia_tilde, skew, Vec3};
use crate::trajectory::StateSample;

/// Regressor from evaluated kinematics.
pub fn regressor_from_kinematics(
    kin: &Kinematics,
    gravity: &Vec3,
    theta_dot: &DVector<f64>,
    theta_dot_ref: &DVector<f64>,
    theta_ddot_ref: &DVector<f64>,
) -> DMatrix<f64> {
    let m = theta_dot.len();
    let mut y = DMatrix::zeros(m, 9 * kin.bodies.len());
    for (b, bk) in kin.bodies.iter().enumerate() {
        let rt = bk.rotation.transpose();
        let j = &bk.jacobian;
        let g_b = rt * gravity;
        let w_b = rt * (j * theta_dot);
        let wr_b = rt * (j * theta_dot_ref);
        let wrd_b = rt * (j * theta_ddot_ref + &bk.jacobian_dot * theta_dot_ref);
        let inertial: Matrix3x6<f64> = inertia_tilde(&wrd_b) + skew(&w_b) * inertia_tilde(&wr_b);
        let jr = j.transpose() * bk.rotation;
        y.view_mut((0, 9 * b), (m, 3)).copy_from(&(&jr * skew(&g_b)));
        y.view_mut((0, 9 * b + 3), (m, 6)).copy_from(&(&jr * inertial));
    }
    y
}

/// `Y_S` with `Y_S π = M θ̈ᵣ + C θ̇ᵣ + g`.
pub fn slotine_li_regressor(
    model: &dyn SprModel,
    theta: &DVector<f64>,
    theta_dot: &DVector<f64>,
    theta_dot_ref: &DVector<f64>,
    theta_ddot_ref: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let m = model.dof();
    for v in [theta_dot_ref, theta_ddot_ref] {
        if v.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: v.len() });
        }
    }
    let kin = eval_kinematics(model, theta, theta_dot)?;
    Ok(regressor_from_kinematics(&kin, &model.gravity(), theta_dot, theta_dot_ref, theta_ddot_ref))
}

/// `Y` with `Y π = M θ̈ + C θ̇ + g`.
pub fn linear_regressor(
    model: &dyn SprModel,
    theta: &DVector<f64>,
    theta_dot: &DVector<f64>,
    theta_ddot: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    slotine_li_regressor(model, theta, theta_dot, theta_dot, theta_ddot)
}

/// Stacked linear regressors over a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub w: DMatrix<f64>,
    pub samples: Vec<StateSample>,
    pub seed: Option<u64>,
}

/// Stack `Y` over the first `j` samples of `samples`. Requires `j·m ≥ 9k`.
pub fn observation_matrix<I>(model: &dyn SprModel, samples: I, j: usize) -> Result<ObservationMatrix>
where
    I: IntoIterator<Item = StateSample>,
{
    let m = model.dof();
    let params = model.param_count();
    if j * m < params {
        return Err(Error::InsufficientSamples { rows: j * m, params });
    }
    let taken: Vec<StateSample> = samples.into_iter().take(j).collect();
    if taken.len() < j {
        return Err(Error::InsufficientSamples { rows: taken.len() * m, params });
    }
    let mut w = DMatrix::zeros(j * m, params);
    for (i, s) in taken.iter().enumerate() {
        let y = linear_regressor(model, &s.theta, &s.theta_dot, &s.theta_ddot)?;
        w.view_mut((i * m, 0), (m, params)).copy_from(&y);
    }
    Ok(ObservationMatrix { w, samples: taken, seed: None })
}

/// Observation matrix from the seeded random state stream.
pub fn random_observation_matrix(model: &dyn SprModel, j: usize, seed: u64) -> Result<ObservationMatrix> {
    let mut obs = observation_matrix(model, crate::trajectory::random_state_sampler(model, seed), j)?;
    obs.seed = Some(seed);
    Ok(obs)
}

/// Seed offset for the reference stream of [`slotine_li_observation_matrix`].
pub const REFERENCE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stacked `[Y; Y_S]` over `j` random states, each `Y_S` with independent random
/// `θ̇ᵣ`, `θ̈ᵣ`. Requires `2·j·m ≥ 9k`.
///
/// For robots with three or more task coordinates the linear rows alone miss
/// parameter combinations that act only through `C θ̇ᵣ` with `θ̇ᵣ ≠ θ̇`, so a
/// reduction that must also serve `Y_S` is built from this matrix.
pub fn slotine_li_observation_matrix(model: &dyn SprModel, j: usize, seed: u64) -> Result<ObservationMatrix> {
    let m = model.dof();
    let params = model.param_count();
    if 2 * j * m < params {
        return Err(Error::InsufficientSamples { rows: 2 * j * m, params });
    }
    let states: Vec<StateSample> = crate::trajectory::random_state_sampler(model, seed).take(j).collect();
    let refs = crate::trajectory::random_state_sampler(model, seed ^ REFERENCE_STREAM);
    let mut w = DMatrix::zeros(2 * j * m, params);
    for (i, (s, r)) in states.iter().zip(refs).enumerate() {
        let y = linear_regressor(model, &s.theta, &s.theta_dot, &s.theta_ddot)?;
        let ys = slotine_li_regressor(model, &s.theta, &s.theta_dot, &r.theta_dot, &r.theta_ddot)?;
        w.view_mut((2 * i * m, 0), (m, params)).copy_from(&y);
        w.view_mut(((2 * i + 1) * m, 0), (m, params)).copy_from(&ys);
    }
    Ok(ObservationMatrix { w, samples: states, seed: Some(seed) })
}
