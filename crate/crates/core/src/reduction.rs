//! Base-parameter reduction through the reduced row echelon form of an
//! observation matrix.
//!
//! With `B` the nonzero rows of `RREF(W)` and `B† = Bᵀ (B Bᵀ)⁻¹`, any regressor whose
//! rows lie in the row space of `W` satisfies `Y π = (Y B†)(B π) = Y_r π_r`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default pivot tolerance, relative to `max |W|`.
pub const DEFAULT_RREF_TOL: f64 = 1e-8;
/// A pivot candidate closer than this factor to the tolerance counts as ambiguous.
pub const PIVOT_AMBIGUITY: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Rref {
    /// Nonzero rows of the reduced row echelon form.
    pub rows: DMatrix<f64>,
    pub pivots: Vec<usize>,
    /// Smallest accepted pivot magnitude, relative to `max |W|`.
    pub smallest_pivot: f64,
    /// Largest rejected column candidate, relative to `max |W|`.
    pub largest_rejected: f64,
}

/// Gauss-Jordan elimination with partial pivoting.
///
/// A column whose best remaining candidate is at most `tol · max|a|` is treated as
/// dependent. Candidates within a factor [`PIVOT_AMBIGUITY`] of that threshold
/// make the rank ambiguous and are reported as an error.
pub fn rref(a: &DMatrix<f64>, tol: f64) -> Result<Rref> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::invalid("RREF tolerance must be positive"));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::RankDeficientObservation("matrix has non-finite entries".into()));
    }
    let scale = a.abs().max();
    if scale == 0.0 {
        return Err(Error::RankDeficientObservation("matrix is zero".into()));
    }
    let thresh = tol * scale;
    let (nr, nc) = a.shape();
    let mut w = a.clone();
    let mut pivots = Vec::new();
    let mut smallest_pivot = f64::INFINITY;
    let mut largest_rejected: f64 = 0.0;
    let mut r = 0;
    for c in 0..nc {
        if r == nr {
            break;
        }
        let (best, mag) = (r..nr).map(|i| (i, w[(i, c)].abs())).fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag > thresh / PIVOT_AMBIGUITY && mag < thresh * PIVOT_AMBIGUITY {
            return Err(Error::RankDeficientObservation(format!(
                "column {c}: pivot candidate {:e} is within {PIVOT_AMBIGUITY}x of the tolerance {:e}",
                mag / scale,
                tol
            )));
        }
        if mag <= thresh {
            largest_rejected = largest_rejected.max(mag / scale);
            for i in r..nr {
                w[(i, c)] = 0.0;
            }
            continue;
        }
        smallest_pivot = smallest_pivot.min(mag / scale);
        w.swap_rows(r, best);
        let p = w[(r, c)];
        for k in c..nc {
            w[(r, k)] /= p;
        }
        w[(r, c)] = 1.0;
        for i in 0..nr {
            if i == r {
                continue;
            }
            let f = w[(i, c)];
            if f != 0.0 {
                for k in c..nc {
                    let v = w[(r, k)];
                    w[(i, k)] -= f * v;
                }
                w[(i, c)] = 0.0;
            }
        }
        pivots.push(c);
        r += 1;
    }
    if pivots.is_empty() {
        return Err(Error::RankDeficientObservation("no pivot above tolerance".into()));
    }
    Ok(Rref { rows: w.rows(0, pivots.len()).into_owned(), pivots, smallest_pivot, largest_rejected })
}

/// `B`, its right inverse `B†`, and the pivot structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionMap {
    pub b: DMatrix<f64>,
    pub b_dagger: DMatrix<f64>,
    pub pivots: Vec<usize>,
    pub tol: f64,
    pub seed: Option<u64>,
    pub smallest_pivot: f64,
    pub largest_rejected: f64,
}

fn right_inverse(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = b * b.transpose();
    let ch = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficientObservation("B Bᵀ is not positive definite".into()))?;
    Ok(b.transpose() * ch.inverse())
}

impl ReductionMap {
    pub fn from_observation(w: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let r = rref(w, tol)?;
        let b_dagger = right_inverse(&r.rows)?;
        Ok(ReductionMap {
            b: r.rows,
            b_dagger,
            pivots: r.pivots,
            tol,
            seed: None,
            smallest_pivot: r.smallest_pivot,
            largest_rejected: r.largest_rejected,
        })
    }

    /// Rebuild from a stored `B`; `B†` is recomputed.
    pub fn from_parts(b: DMatrix<f64>, pivots: Vec<usize>, tol: f64, seed: Option<u64>) -> Result<Self> {
        if pivots.len() != b.nrows() {
            return Err(Error::DimensionMismatch { expected: b.nrows(), got: pivots.len() });
        }
        for (row, &c) in pivots.iter().enumerate() {
            if c >= b.ncols() {
                return Err(Error::invalid(format!("pivot column {c} out of range")));
            }
            for i in 0..b.nrows() {
                let want = if i == row { 1.0 } else { 0.0 };
                if (b[(i, c)] - want).abs() > 1e-12 {
                    return Err(Error::invalid(format!("B is not in reduced row echelon form at pivot column {c}")));
                }
            }
        }
        let b_dagger = right_inverse(&b)?;
        Ok(ReductionMap { b, b_dagger, pivots, tol, seed, smallest_pivot: f64::NAN, largest_rejected: f64::NAN })
    }

    /// Base-parameter count `p`.
    pub fn rank(&self) -> usize {
        self.b.nrows()
    }

    pub fn full_count(&self) -> usize {
        self.b.ncols()
    }

    /// `Y_r = Y B†`.
    pub fn reduce(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.full_count() {
            return Err(Error::DimensionMismatch { expected: self.full_count(), got: y.ncols() });
        }
        Ok(y * &self.b_dagger)
    }

    /// `π_r = B π`.
    pub fn reduce_pi(&self, pi: &DVector<f64>) -> Result<DVector<f64>> {
        if pi.len() != self.full_count() {
            return Err(Error::DimensionMismatch { expected: self.full_count(), got: pi.len() });
        }
        Ok(&self.b * pi)
    }

    /// Map a full-parameter gain or covariance to reduced coordinates, `B G Bᵀ`.
    pub fn reduce_gain(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if g.shape() != (self.full_count(), self.full_count()) {
            return Err(Error::DimensionMismatch { expected: self.full_count(), got: g.nrows() });
        }
        Ok(&self.b * g * self.b.transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::assemble_pi;
    use crate::regressor::{linear_regressor, random_observation_matrix};
    use crate::robots::{Diamond, Rrr3};
    use crate::trajectory::random_state_sampler;
    use alloc::boxed::Box;
    use crate::model::SprModel;

    #[test]
    fn rref_of_small_matrix() {
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(3, 4, &[
            1.0, 2.0, 1.0, 0.0,
            2.0, 4.0, 0.0, 2.0,
            3.0, 6.0, 1.0, 2.0,
        ]);
        let r = rref(&a, 1e-10).unwrap();
        assert_eq!(r.pivots, alloc::vec![0, 2]);
        #[rustfmt::skip]
        let expect = DMatrix::from_row_slice(2, 4, &[
            1.0, 2.0, 0.0, 1.0,
            0.0, 0.0, 1.0, -1.0,
        ]);
        assert!((r.rows - expect).abs().max() < 1e-15);
    }

    #[test]
    fn identical_columns_merge() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, -1.0, -1.0, 3.0]);
        let map = ReductionMap::from_observation(&a, 1e-10).unwrap();
        assert_eq!(map.rank(), 2);
        assert_eq!(map.pivots, alloc::vec![0, 2]);
        assert_eq!(map.b[(0, 1)], 1.0);
        let pi = DVector::from_vec(alloc::vec![0.3, 0.4, 0.5]);
        assert!((map.reduce_pi(&pi).unwrap()[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_and_ambiguous_matrices_are_rejected() {
        assert!(matches!(rref(&DMatrix::zeros(3, 3), 1e-8), Err(Error::RankDeficientObservation(_))));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3e-8]);
        assert!(matches!(rref(&a, 1e-8), Err(Error::RankDeficientObservation(_))));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12]);
        assert_eq!(rref(&b, 1e-8).unwrap().pivots, alloc::vec![0]);
    }

    #[test]
    fn from_parts_checks_echelon_form() {
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, 0.0, 0.0, 0.0, 1.0]);
        let map = ReductionMap::from_parts(b.clone(), alloc::vec![0, 2], 1e-8, None).unwrap();
        assert!((&map.b * &map.b_dagger - DMatrix::identity(2, 2)).abs().max() < 1e-14);
        assert!(ReductionMap::from_parts(b, alloc::vec![0, 1], 1e-8, None).is_err());
    }

    fn models() -> [Box<dyn SprModel>; 2] {
        [Box::new(Diamond::aras()), Box::new(Rrr3::reference())]
    }

    #[test]
    fn reduction_identities_on_fresh_states() {
        for model in models() {
            let model = model.as_ref();
            let obs = random_observation_matrix(model, 60, 1).unwrap();
            let map = ReductionMap::from_observation(&obs.w, DEFAULT_RREF_TOL).unwrap();
            let p = map.rank();
            assert!(p < model.param_count());
            // B in RREF with identity pivot block; B B† = I
            for (row, &c) in map.pivots.iter().enumerate() {
                for i in 0..p {
                    assert_eq!(map.b[(i, c)], if i == row { 1.0 } else { 0.0 });
                }
            }
            assert!((&map.b * &map.b_dagger - DMatrix::identity(p, p)).abs().max() < 1e-10);
            let pi = assemble_pi(model).0;
            let pi_r = map.reduce_pi(&pi).unwrap();
            assert!((map.reduce_pi(&(&pi * 2.0)).unwrap() - &pi_r * 2.0).abs().max() < 1e-15);
            for s in random_state_sampler(model, 1234).take(50) {
                let y = linear_regressor(model, &s.theta, &s.theta_dot, &s.theta_ddot).unwrap();
                let scale = y.abs().max();
                let proj = &y * &map.b_dagger * &map.b;
                assert!((proj - &y).abs().max() < 1e-8 * scale);
                let full = &y * &pi;
                let red = map.reduce(&y).unwrap() * &pi_r;
                assert!((full - &red).abs().max() / red.abs().max().max(1.0) < 1e-10);
            }
        }
    }

    #[test]
    fn rank_is_stable_across_seeds() {
        for model in models() {
            let model = model.as_ref();
            let ranks: Vec<usize> = (0..10)
                .map(|seed| {
                    let obs = random_observation_matrix(model, 60, seed).unwrap();
                    ReductionMap::from_observation(&obs.w, DEFAULT_RREF_TOL).unwrap().rank()
                })
                .collect();
            assert!(ranks.iter().all(|&p| p == ranks[0]), "{}: {:?}", model.name(), ranks);
        }
    }

    #[test]
    fn rref_is_independent_of_row_order() {
        let model = Diamond::aras();
        let obs = random_observation_matrix(&model, 60, 3).unwrap();
        let a = rref(&obs.w, DEFAULT_RREF_TOL).unwrap();
        let n = obs.w.nrows();
        let reversed = DMatrix::from_fn(n, obs.w.ncols(), |i, j| obs.w[(n - 1 - i, j)]);
        let b = rref(&reversed, DEFAULT_RREF_TOL).unwrap();
        assert_eq!(a.pivots, b.pivots);
        assert!((a.rows - b.rows).abs().max() < 1e-10);
    }
}
