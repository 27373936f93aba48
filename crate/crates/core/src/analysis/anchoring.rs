use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::pooling::PooledEstimate;
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    Negative,
    Anchored,
    Positive,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Negative => "negative",
            Classification::Anchored => "anchored",
            Classification::Positive => "positive",
        })
    }
}

fn positive(v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonPositiveVariance(v))
    }
}

/// Variance that keeps the proportion of information lost to missing data
/// equal between primary and sensitivity analyses.
pub fn anchored_variance(v_primary_obs: f64, v_primary_full: f64, v_sensitivity_full: f64) -> Result<f64> {
    Ok(positive(v_primary_obs)? / positive(v_primary_full)? * positive(v_sensitivity_full)?)
}

/// Compare information ratios (observed over full-data information).
pub fn classify_information(primary_ratio: f64, sensitivity_ratio: f64, tolerance: f64) -> Classification {
    if (primary_ratio - sensitivity_ratio).abs() <= tolerance * primary_ratio {
        Classification::Anchored
    } else if sensitivity_ratio < primary_ratio {
        Classification::Negative
    } else {
        Classification::Positive
    }
}

/// Share of the reference analysis's information that the comparison
/// analysis lacks; negative when the comparison has more.
pub fn information_loss_fraction(se_reference: f64, se_comparison: f64) -> Result<f64> {
    for se in [se_reference, se_comparison] {
        if !(se > 0.0 && se.is_finite()) {
            return Err(Error::NonPositiveSe(se));
        }
    }
    let i_ref = se_reference.powi(-2);
    let i_cmp = se_comparison.powi(-2);
    Ok((i_ref - i_cmp) / i_ref)
}

/// Add `N(0, var_anchored - var_ml)` noise to an ML estimate so that its
/// sampling variance matches the anchored target.
pub fn inflate_to_anchored<R: Rng + ?Sized>(theta_ml: f64, var_ml: f64, var_anchored: f64, rng: &mut R) -> Result<f64> {
    let extra = var_anchored - var_ml;
    if extra < 0.0 || !extra.is_finite() {
        return Err(Error::VarianceOrderViolation {
            ml: var_ml,
            anchored: var_anchored,
        });
    }
    if extra == 0.0 {
        return Ok(theta_ml);
    }
    let noise = Normal::new(0.0, extra.sqrt()).expect("positive finite sd");
    Ok(theta_ml + noise.sample(rng))
}

/// Variances of one sensitivity analysis and the anchoring verdict.
///
/// Full-data quantities exist only when the complete data are known (in
/// simulation); on real data they are `None` and no verdict is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchoringReport {
    pub v_primary_obs: f64,
    pub v_primary_full: Option<f64>,
    pub v_sensitivity_full: Option<f64>,
    pub v_anchored: Option<f64>,
    pub v_rubin: f64,
    pub within: f64,
    pub between: f64,
    pub v_design_applied: Option<f64>,
    /// `V_primary_full / V_primary_obs`.
    pub primary_ratio: Option<f64>,
    /// `V_sensitivity_full / V_rubin`.
    pub sensitivity_ratio: Option<f64>,
    pub classification: Option<Classification>,
    pub tolerance: f64,
}

impl AnchoringReport {
    /// Report for observed data only.
    pub fn observed(v_primary_obs: f64, sensitivity: &PooledEstimate, tolerance: f64) -> Result<Self> {
        Ok(AnchoringReport {
            v_primary_obs: positive(v_primary_obs)?,
            v_primary_full: None,
            v_sensitivity_full: None,
            v_anchored: None,
            v_rubin: positive(sensitivity.total)?,
            within: sensitivity.within,
            between: sensitivity.between,
            v_design_applied: None,
            primary_ratio: None,
            sensitivity_ratio: None,
            classification: None,
            tolerance,
        })
    }

    /// Full report when the complete-data variances are known.
    pub fn with_full_data(
        v_primary_obs: f64,
        v_primary_full: f64,
        v_sensitivity_full: f64,
        sensitivity: &PooledEstimate,
        v_design_applied: Option<f64>,
        tolerance: f64,
    ) -> Result<Self> {
        let mut r = Self::observed(v_primary_obs, sensitivity, tolerance)?;
        let v_anchored = anchored_variance(v_primary_obs, v_primary_full, v_sensitivity_full)?;
        let primary_ratio = v_primary_full / v_primary_obs;
        let sensitivity_ratio = v_sensitivity_full / r.v_rubin;
        r.v_primary_full = Some(v_primary_full);
        r.v_sensitivity_full = Some(v_sensitivity_full);
        r.v_anchored = Some(v_anchored);
        r.v_design_applied = v_design_applied;
        r.primary_ratio = Some(primary_ratio);
        r.sensitivity_ratio = Some(sensitivity_ratio);
        r.classification = Some(classify_information(primary_ratio, sensitivity_ratio, tolerance));
        Ok(r)
    }
}
