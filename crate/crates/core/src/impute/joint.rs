use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mvn::{checked_cholesky, MvnParams};
use crate::strategy::Method;

/// Joint distribution of a deviator's full outcome vector under a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub params: MvnParams,
    /// Last observed visit (1-based), i.e. number of observed visits.
    pub last_observed: usize,
}

/// Conditional-covariance-preserving combination of two arm covariances.
///
/// Pre-deviation block from `own`; regression of post- on pre-deviation
/// outcomes and the residual covariance from `reference`:
/// `S11 = A11`, `S21 = R21 R11^-1 A11`,
/// `S22 = R22 - R21 R11^-1 (R11 - A11) R11^-1 R12`.
pub fn reference_conditional_covariance(
    own: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    split: usize,
) -> Result<DMatrix<f64>> {
    let j = own.nrows();
    let d = split;
    let m = j - d;
    let r11 = reference.view((0, 0), (d, d)).into_owned();
    let r21 = reference.view((d, 0), (m, d)).into_owned();
    let r22 = reference.view((d, d), (m, m)).into_owned();
    let a11 = own.view((0, 0), (d, d)).into_owned();
    let chol = checked_cholesky(&r11, "reference pre-deviation block").map_err(|_| Error::SingularPartition)?;
    // g = R21 R11^-1
    let g = chol.solve(&r21.transpose()).transpose();
    let s21 = &g * &a11;
    let s22 = r22 - &g * (&r11 - &a11) * g.transpose();
    let mut out = DMatrix::zeros(j, j);
    out.view_mut((0, 0), (d, d)).copy_from(&a11);
    out.view_mut((d, 0), (m, d)).copy_from(&s21);
    out.view_mut((0, d), (d, m)).copy_from(&s21.transpose());
    out.view_mut((d, d), (m, m)).copy_from(&s22);
    crate::mvn::symmetrize(&mut out);
    Ok(out)
}

/// Build the joint distribution for a subject whose last observed visit is
/// `last_observed` (1-based), from the draws of their own arm and the
/// reference arm.
pub fn build_joint(method: Method, own: &MvnParams, reference: &MvnParams, last_observed: usize) -> Result<JointSpec> {
    let j = own.dim();
    let d = last_observed;
    if reference.dim() != j {
        return Err(Error::DimensionMismatch("arm draws differ in dimension".into()));
    }
    if d == 0 || d >= j {
        return Err(Error::DimensionMismatch(format!(
            "last observed visit {d} must lie in 1..{j}"
        )));
    }
    let mu_a = &own.mean;
    let mu_r = &reference.mean;
    let mean = match method {
        Method::Mar | Method::DeltaFixed { .. } | Method::DeltaStochastic { .. } => mu_a.clone(),
        Method::JumpToReference => DVector::from_fn(j, |t, _| if t < d { mu_a[t] } else { mu_r[t] }),
        Method::CopyIncrementsInReference => DVector::from_fn(j, |t, _| {
            if t < d {
                mu_a[t]
            } else {
                mu_a[d - 1] + (mu_r[t] - mu_r[d - 1])
            }
        }),
        Method::LastMeanCarriedForward => DVector::from_fn(j, |t, _| if t < d { mu_a[t] } else { mu_a[d - 1] }),
        Method::CopyReference => mu_r.clone(),
    };
    let cov = match method {
        Method::JumpToReference | Method::CopyIncrementsInReference => {
            reference_conditional_covariance(&own.cov, &reference.cov, d)?
        }
        Method::CopyReference => reference.cov.clone(),
        _ => own.cov.clone(),
    };
    Ok(JointSpec {
        params: MvnParams::new(mean, cov)?,
        last_observed: d,
    })
}
