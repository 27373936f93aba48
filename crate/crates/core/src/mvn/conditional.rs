use nalgebra::{DMatrix, DVector};

use super::{checked_cholesky, symmetrize, MvnParams};
use crate::error::{Error, Result};

/// Distribution of the missing block given the observed block.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalNormal {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Standard Gaussian conditioning on an arbitrary observed index set.
///
/// `observed` lists 0-based visit indices; `values` are the observed outcomes
/// in the same order. The missing block is every other index, ascending.
pub fn conditional_normal(joint: &MvnParams, observed: &[usize], values: &[f64]) -> Result<ConditionalNormal> {
    let j = joint.dim();
    if observed.is_empty() || observed.len() >= j || observed.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "observed set of size {} (values {}) must be a non-empty proper subset of {j} visits",
            observed.len(),
            values.len()
        )));
    }
    let mut is_obs = vec![false; j];
    for &o in observed {
        if o >= j || is_obs[o] {
            return Err(Error::DimensionMismatch(format!("bad observed index {o}")));
        }
        is_obs[o] = true;
    }
    let missing: Vec<usize> = (0..j).filter(|&t| !is_obs[t]).collect();
    let s = &joint.cov;
    let s_oo = DMatrix::from_fn(observed.len(), observed.len(), |r, c| s[(observed[r], observed[c])]);
    let s_mo = DMatrix::from_fn(missing.len(), observed.len(), |r, c| s[(missing[r], observed[c])]);
    let s_mm = DMatrix::from_fn(missing.len(), missing.len(), |r, c| s[(missing[r], missing[c])]);
    let chol = checked_cholesky(&s_oo, "observed block").map_err(|_| Error::SingularObservedBlock)?;
    // coef = S_mo S_oo^-1
    let coef = chol.solve(&s_mo.transpose()).transpose();
    let resid = DVector::from_fn(observed.len(), |r, _| values[r] - joint.mean[observed[r]]);
    let mean = DVector::from_fn(missing.len(), |r, _| joint.mean[missing[r]]) + &coef * resid;
    let mut cov = s_mm - &coef * s_mo.transpose();
    symmetrize(&mut cov);
    checked_cholesky(&cov, "conditional covariance")?;
    Ok(ConditionalNormal { mean, cov })
}

/// Precomputed conditioning for a monotone split: visits `0..d` observed,
/// `d..J` missing. Independent of the observed values, so one map serves
/// every subject sharing the deviation time.
#[derive(Debug, Clone)]
pub struct ConditionalMap {
    pub n_observed: usize,
    pub mean_observed: DVector<f64>,
    pub mean_missing: DVector<f64>,
    /// `S_mo S_oo^-1`, shape (J-d) x d.
    pub coef: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    /// Lower Cholesky factor of `cov`.
    pub chol: DMatrix<f64>,
}

impl ConditionalMap {
    pub fn new(joint: &MvnParams, n_observed: usize) -> Result<Self> {
        let j = joint.dim();
        let d = n_observed;
        if d == 0 || d >= j {
            return Err(Error::DimensionMismatch(format!("split at {d} of {j} visits")));
        }
        let m = j - d;
        let s = &joint.cov;
        let s_oo = s.view((0, 0), (d, d)).into_owned();
        let s_mo = s.view((d, 0), (m, d)).into_owned();
        let chol_oo = checked_cholesky(&s_oo, "observed block").map_err(|_| Error::SingularObservedBlock)?;
        let coef = chol_oo.solve(&s_mo.transpose()).transpose();
        let mut cov = s.view((d, d), (m, m)).into_owned() - &coef * s_mo.transpose();
        symmetrize(&mut cov);
        let chol = checked_cholesky(&cov, "conditional covariance")?.l();
        Ok(ConditionalMap {
            n_observed: d,
            mean_observed: joint.mean.rows(0, d).into_owned(),
            mean_missing: joint.mean.rows(d, m).into_owned(),
            coef,
            cov,
            chol,
        })
    }

    pub fn n_missing(&self) -> usize {
        self.mean_missing.len()
    }

    /// Conditional mean for observed history `y_obs` (length `d`), written into `out`.
    pub fn mean_into(&self, y_obs: &[f64], out: &mut [f64]) {
        let d = self.n_observed;
        for (r, o) in out.iter_mut().enumerate() {
            let mut v = self.mean_missing[r];
            for c in 0..d {
                v += self.coef[(r, c)] * (y_obs[c] - self.mean_observed[c]);
            }
            *o = v;
        }
    }

    /// Conditional draw using standard-normal innovations `z` (length `J-d`).
    pub fn sample_into(&self, y_obs: &[f64], z: &[f64], out: &mut [f64]) {
        self.mean_into(y_obs, out);
        for (r, o) in out.iter_mut().enumerate() {
            let mut v = 0.0;
            for (c, zc) in z.iter().enumerate().take(r + 1) {
                v += self.chol[(r, c)] * zc;
            }
            *o += v;
        }
    }

    /// Recover the innovations that `sample_into` would map to `y_mis`.
    pub fn innovations(&self, y_obs: &[f64], y_mis: &[f64], z: &mut [f64]) {
        let mut mean = vec![0.0; self.n_missing()];
        self.mean_into(y_obs, &mut mean);
        for r in 0..z.len() {
            let mut v = y_mis[r] - mean[r];
            for c in 0..r {
                v -= self.chol[(r, c)] * z[c];
            }
            z[r] = v / self.chol[(r, r)];
        }
    }

    pub fn to_conditional(&self, y_obs: &[f64]) -> ConditionalNormal {
        let mut mean = vec![0.0; self.n_missing()];
        self.mean_into(y_obs, &mut mean);
        ConditionalNormal {
            mean: DVector::from_vec(mean),
            cov: self.cov.clone(),
        }
    }
}
