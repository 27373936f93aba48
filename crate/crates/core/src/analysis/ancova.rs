use nalgebra::{Matrix3, Vector3};

use crate::data::{Arm, TrialDataset};
use crate::error::{Error, Result};

/// Least-squares fit of the final-visit outcome on baseline and arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncovaFit {
    /// Active minus reference, adjusted for baseline.
    pub effect: f64,
    /// `s^2 (X'X)^-1` for the arm coefficient.
    pub variance: f64,
    pub baseline_coef: f64,
    pub intercept: f64,
    /// Residual variance with divisor `n - 3`.
    pub residual_variance: f64,
    pub n: usize,
}

/// ANCOVA on a complete dataset: regress the last visit on
/// `{1, baseline, 1[active]}`.
pub fn ancova(data: &TrialDataset) -> Result<AncovaFit> {
    let j = data.n_visits();
    let n = data.n_subjects();
    let mut baseline = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    for i in 0..n {
        let row = data.row(i);
        match (row[0], row[j - 1]) {
            (Some(b), Some(y)) => {
                baseline.push(b);
                outcome.push(y);
            }
            _ => return Err(Error::IncompleteData),
        }
    }
    let active: Vec<bool> = data.arms().iter().map(|&a| a == Arm::Active).collect();
    ancova_columns(&baseline, &outcome, &active)
}

/// ANCOVA from columns; `active[i]` is the arm indicator.
pub fn ancova_columns(baseline: &[f64], outcome: &[f64], active: &[bool]) -> Result<AncovaFit> {
    let n = outcome.len();
    if baseline.len() != n || active.len() != n {
        return Err(Error::DimensionMismatch("ANCOVA columns differ in length".into()));
    }
    if n <= 3 {
        return Err(Error::CollinearDesign);
    }
    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for i in 0..n {
        let x = Vector3::new(1.0, baseline[i], if active[i] { 1.0 } else { 0.0 });
        xtx += x * x.transpose();
        xty += x * outcome[i];
    }
    let n_act = xtx[(2, 2)];
    if n_act == 0.0 || n_act == n as f64 {
        return Err(Error::CollinearDesign);
    }
    let chol = xtx.cholesky().ok_or(Error::CollinearDesign)?;
    // Relative pivot check, as for covariance matrices.
    let l = chol.l();
    let max_diag = (0..3).map(|d| xtx[(d, d)]).fold(0.0, f64::max);
    if (0..3).any(|d| l[(d, d)] * l[(d, d)] <= 1e-12 * max_diag) {
        return Err(Error::CollinearDesign);
    }
    let beta = chol.solve(&xty);
    let rss: f64 = (0..n)
        .map(|i| {
            let fit = beta[0] + beta[1] * baseline[i] + if active[i] { beta[2] } else { 0.0 };
            (outcome[i] - fit).powi(2)
        })
        .sum();
    let s2 = rss / (n - 3) as f64;
    let inv = chol.inverse();
    Ok(AncovaFit {
        effect: beta[2],
        variance: s2 * inv[(2, 2)],
        baseline_coef: beta[1],
        intercept: beta[0],
        residual_variance: s2,
        n,
    })
}
