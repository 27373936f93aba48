//! Multivariate-normal estimation and conditioning for monotone data.

mod conditional;
mod em;
mod factored;
mod posterior;

pub use conditional::{conditional_normal, ConditionalMap, ConditionalNormal};
pub use em::{em_mle_monotone, observed_loglik, EmConfig, EmFit};
pub use factored::monotone_mle;
pub use posterior::{ChainConfig, PosteriorDraw, PosteriorSampler};

pub(crate) use em::MonotoneRows;
pub(crate) use factored::factored_mle;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Cholesky pivots must exceed this fraction of the largest diagonal entry.
pub const PD_TOLERANCE: f64 = 1e-10;

/// Cholesky factorisation that also enforces the relative pivot tolerance.
pub fn checked_cholesky(m: &DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotPositiveDefinite { context });
    }
    let max_diag = m.diagonal().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite { context });
    }
    let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite { context })?;
    let l = chol.l_dirty();
    let floor = PD_TOLERANCE * max_diag;
    if (0..m.nrows()).any(|i| !(l[(i, i)] * l[(i, i)] > floor)) {
        return Err(Error::NotPositiveDefinite { context });
    }
    Ok(chol)
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    checked_cholesky(m, "check").is_ok()
}

/// Mean vector and covariance matrix of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnParams {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl MvnParams {
    /// Validates dimensions, symmetry and positive definiteness.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let j = mean.len();
        if cov.nrows() != j || cov.ncols() != j {
            return Err(Error::DimensionMismatch(format!(
                "mean has {j} entries, covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let scale = cov.amax().max(1.0);
        for r in 0..j {
            for c in 0..r {
                if (cov[(r, c)] - cov[(c, r)]).abs() > 1e-9 * scale {
                    return Err(Error::NotPositiveDefinite {
                        context: "covariance not symmetric",
                    });
                }
            }
        }
        checked_cholesky(&cov, "covariance")?;
        Ok(MvnParams { mean, cov })
    }

    pub fn from_slices(mean: &[f64], cov_rows: &[&[f64]]) -> Result<Self> {
        let j = mean.len();
        let cov = DMatrix::from_fn(j, j, |r, c| cov_rows[r][c]);
        Self::new(DVector::from_column_slice(mean), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Symmetrise in place; guards against round-off asymmetry.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for r in 0..n {
        for c in 0..r {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(MvnParams::from_slices(&[0.0, 0.0], &[&[1.0, 2.0], &[2.0, 1.0]]).is_err());
        assert!(MvnParams::from_slices(&[0.0, 0.0], &[&[1.0, 0.5], &[0.4, 1.0]]).is_err());
        assert!(MvnParams::from_slices(&[0.0, 0.0], &[&[1.0, 0.5], &[0.5, 1.0]]).is_ok());
    }

    #[test]
    fn relative_pivot_tolerance() {
        // Nearly singular: second pivot ~ 1e-12 of the diagonal.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-12]);
        assert!(!is_positive_definite(&m));
        let ok = DMatrix::from_row_slice(2, 2, &[1.0, 0.999, 0.999, 1.0]);
        assert!(is_positive_definite(&ok));
    }
}
