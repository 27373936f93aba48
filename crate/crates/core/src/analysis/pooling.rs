use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Degrees-of-freedom rule reported with a pooled estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DfMethod {
    #[default]
    Rubin,
    /// Small-sample rule; needs the complete-data degrees of freedom.
    BarnardRubin { complete_df: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledEstimate {
    pub theta: f64,
    /// Mean within-imputation variance `W`.
    pub within: f64,
    /// Between-imputation variance `B` (divisor `K - 1`).
    pub between: f64,
    /// `W + (1 + 1/K) B`.
    pub total: f64,
    /// Infinite when `B = 0`.
    pub df: f64,
    pub df_method: DfMethod,
    pub k: usize,
}

impl PooledEstimate {
    pub fn se(&self) -> f64 {
        self.total.sqrt()
    }

    /// Two-sided interval `theta +/- t_{df} se`; normal when `df` is infinite.
    pub fn confidence_interval(&self, level: f64) -> (f64, f64) {
        let p = 0.5 + level / 2.0;
        let q = if self.df.is_finite() {
            StudentsT::new(0.0, 1.0, self.df).expect("df > 0").inverse_cdf(p)
        } else {
            Normal::standard().inverse_cdf(p)
        };
        (self.theta - q * self.se(), self.theta + q * self.se())
    }
}

/// Rubin's rules with the 1987 degrees of freedom.
pub fn pool_rubin(fits: &[(f64, f64)]) -> Result<PooledEstimate> {
    pool_rubin_with(fits, DfMethod::Rubin)
}

pub fn pool_rubin_with(fits: &[(f64, f64)], df_method: DfMethod) -> Result<PooledEstimate> {
    let k = fits.len();
    if k < 2 {
        return Err(Error::TooFewImputations(k));
    }
    let kf = k as f64;
    let theta = fits.iter().map(|f| f.0).sum::<f64>() / kf;
    let within = fits.iter().map(|f| f.1).sum::<f64>() / kf;
    let between = fits.iter().map(|f| (f.0 - theta).powi(2)).sum::<f64>() / (kf - 1.0);
    let inflated = (1.0 + 1.0 / kf) * between;
    let total = within + inflated;
    let df_old = if inflated > 0.0 {
        (kf - 1.0) * (1.0 + within / inflated).powi(2)
    } else {
        f64::INFINITY
    };
    let df = match df_method {
        DfMethod::Rubin => df_old,
        DfMethod::BarnardRubin { complete_df } => {
            let gamma = if total > 0.0 { inflated / total } else { 0.0 };
            let df_obs = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - gamma);
            if df_old.is_infinite() {
                df_obs
            } else {
                1.0 / (1.0 / df_old + 1.0 / df_obs)
            }
        }
    };
    Ok(PooledEstimate {
        theta,
        within,
        between,
        total,
        df,
        df_method,
        k,
    })
}
