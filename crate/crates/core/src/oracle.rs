//! Closed-form expectations used as oracles for the Monte Carlo harness.
//!
//! All functions are pure and deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Information about a mean when `n_d` of `n` subjects have variance
/// `var_deviating` instead of `var`: `n^2 / ((n - n_d) var + n_d var_deviating)`.
pub fn intro_information(n: f64, n_d: f64, var: f64, var_deviating: f64) -> f64 {
    n * n / ((n - n_d) * var + n_d * var_deviating)
}

/// `intro_information` over a grid of deviator variances.
pub fn intro_information_curve(n: f64, n_d: f64, var: f64, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter().map(|&v| (v, intro_information(n, n_d, var, v))).collect()
}

/// Subjects deviating at one visit and the mean of their final-visit outcome
/// under the controlled model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationGroup {
    /// First unobserved visit (1-based), in `2..=J`.
    pub visit: usize,
    pub count: usize,
    pub final_mean: f64,
}

/// Active arm of `n` subjects split into on-treatment completers and
/// controlled deviators; the reference arm has `n` subjects and the same
/// final-visit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationScheme {
    pub n: usize,
    pub n_visits: usize,
    pub groups: Vec<DeviationGroup>,
    /// Final-visit mean on treatment.
    pub active_final_mean: f64,
    /// Final-visit variance.
    pub final_variance: f64,
    /// Final-visit variance given baseline, for the baseline-adjusted form.
    pub adjusted_variance: Option<f64>,
}

impl DeviationScheme {
    pub fn n_deviating(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn n_on_treatment(&self) -> usize {
        self.n - self.n_deviating()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_deviating() > self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} deviators exceed arm size {}",
                self.n_deviating(),
                self.n
            )));
        }
        if let Some(g) = self.groups.iter().find(|g| g.visit < 2 || g.visit > self.n_visits) {
            return Err(Error::DimensionMismatch(format!("deviation visit {} outside 2..={}", g.visit, self.n_visits)));
        }
        if !(self.final_variance > 0.0) || self.adjusted_variance.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::NonPositiveVariance(self.final_variance));
        }
        Ok(())
    }

    fn variance(&self, baseline_adjusted: bool) -> Result<f64> {
        if baseline_adjusted {
            self.adjusted_variance
                .ok_or_else(|| Error::Config("baseline-adjusted form needs the conditional variance".into()))
        } else {
            Ok(self.final_variance)
        }
    }
}

/// Expected full-data variance of the treatment estimate under a
/// controlled deviation scheme, in its published large-sample form:
///
/// `2 s2/n + sum_j n_o n_dj D_j^2 / n^3 + sum_{p != q} n_dp n_dq D_pq^2 / n^3`
///
/// with `D_j = mu_aJ - mu_djJ`, `D_pq = mu_dpJ - mu_dqJ` and the second sum
/// over ordered pairs.
pub fn prop1_full_variance(scheme: &DeviationScheme, baseline_adjusted: bool) -> Result<f64> {
    scheme.validate()?;
    let s2 = scheme.variance(baseline_adjusted)?;
    let n = scheme.n as f64;
    let n_o = scheme.n_on_treatment() as f64;
    let n3 = n * n * n;
    let mut v = 2.0 * s2 / n;
    for g in &scheme.groups {
        v += n_o * g.count as f64 * (scheme.active_final_mean - g.final_mean).powi(2) / n3;
    }
    for (a, p) in scheme.groups.iter().enumerate() {
        for (b, q) in scheme.groups.iter().enumerate() {
            if a != b {
                v += (p.count * q.count) as f64 * (p.final_mean - q.final_mean).powi(2) / n3;
            }
        }
    }
    Ok(v)
}

/// Exact expectation of `s_r^2/n + s_a^2/n` (sample variances with divisor
/// `n - 1`) for fixed group sizes, without the large-sample simplification:
/// pairwise terms count each unordered pair once and the divisor is
/// `n^2 (n - 1)`.
pub fn prop1_exact_variance(scheme: &DeviationScheme) -> Result<f64> {
    scheme.validate()?;
    let n = scheme.n as f64;
    let mut groups: Vec<(f64, f64)> = vec![(scheme.n_on_treatment() as f64, scheme.active_final_mean)];
    groups.extend(scheme.groups.iter().map(|g| (g.count as f64, g.final_mean)));
    let mut spread = 0.0;
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            spread += groups[a].0 * groups[b].0 * (groups[a].1 - groups[b].1).powi(2);
        }
    }
    Ok(2.0 * scheme.final_variance / n + spread / (n * n * (n - 1.0)))
}

/// Extra full-data variance from a fixed δ offset that grows by one step per
/// post-deviation visit. `groups` holds `(first unobserved visit, count)`.
pub fn delta_q_term(n: usize, n_o: usize, groups: &[(usize, usize)], delta: f64, n_visits: usize) -> f64 {
    let n = n as f64;
    let n3 = n * n * n;
    let step = |j: usize| (n_visits + 1 - j) as f64 * delta;
    let mut q = 0.0;
    for &(j, c) in groups {
        q += n_o as f64 * c as f64 * step(j).powi(2) / n3;
    }
    for (a, &(p, cp)) in groups.iter().enumerate() {
        for (b, &(r, cr)) in groups.iter().enumerate() {
            if a != b {
                q += (cp * cr) as f64 * (step(p) - step(r)).powi(2) / n3;
            }
        }
    }
    q
}

/// Inputs for one deviation pattern of the between-imputation variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BetweenPattern {
    /// Share of the arm deviating with this pattern.
    pub share: f64,
    /// Residual variance of the final visit given the observed history.
    pub residual_variance: f64,
    pub count: usize,
    /// Mean of the deviators' predictor vectors `(1, history)`.
    pub mean_predictor: DVector<f64>,
    /// Covariance of the imputation-model coefficients.
    pub coef_cov: DMatrix<f64>,
}

fn quad(p: &DVector<f64>, v: &DMatrix<f64>) -> Result<f64> {
    if v.nrows() != p.len() || v.ncols() != p.len() {
        return Err(Error::DimensionMismatch(format!(
            "predictor of length {} against {}x{} covariance",
            p.len(),
            v.nrows(),
            v.ncols()
        )));
    }
    Ok((p.transpose() * v * p)[(0, 0)])
}

/// `E[B] = sum_j pi_j^2 (s_j^2 + n_dj P_j V_j P_j') / n_dj`.
pub fn expected_between_variance(patterns: &[BetweenPattern]) -> Result<f64> {
    let mut total = 0.0;
    for p in patterns {
        if p.share == 0.0 {
            continue;
        }
        if p.count == 0 {
            return Err(Error::DimensionMismatch("pattern with positive share has no subjects".into()));
        }
        let nd = p.count as f64;
        total += p.share.powi(2) * (p.residual_variance + nd * quad(&p.mean_predictor, &p.coef_cov)?) / nd;
    }
    Ok(total)
}

/// Inputs for one deviation pattern of the anchoring gap.
#[derive(Debug, Clone, PartialEq)]
pub struct GapPattern {
    pub share: f64,
    pub mean_predictor: DVector<f64>,
    /// Coefficient covariance of the primary (MAR) imputation model.
    pub coef_cov_primary: DMatrix<f64>,
    /// Coefficient covariance of the sensitivity imputation model.
    pub coef_cov_sensitivity: DMatrix<f64>,
}

/// Leading term of `V_anchored - V_rubin`:
/// `sum_j pi_j^2 P_j (V_primary,j - V_sensitivity,j) P_j'`.
pub fn theorem1_gap(patterns: &[GapPattern]) -> Result<f64> {
    patterns.iter().try_fold(0.0, |acc, p| {
        let diff = &p.coef_cov_primary - &p.coef_cov_sensitivity;
        Ok(acc + p.share.powi(2) * quad(&p.mean_predictor, &diff)?)
    })
}

/// The gap when the reference arm is fully observed, the sensitivity model
/// is fitted to all `n` reference subjects and the primary model to the
/// `n (1 - pi_d)` on-treatment completers:
/// `sum_j pi_j^2 P_j S_j P_j' * pi_d / (n (1 - pi_d))` with `S_j` the
/// per-subject coefficient covariance.
pub fn reference_observed_gap(
    patterns: &[(f64, DVector<f64>, DMatrix<f64>)],
    n: usize,
    share_deviating: f64,
) -> Result<f64> {
    let scale = share_deviating / (n as f64 * (1.0 - share_deviating));
    patterns
        .iter()
        .try_fold(0.0, |acc, (pi, p, s)| Ok(acc + pi.powi(2) * quad(p, s)? * scale))
}

/// Gap for a δ drawn from `N(mean, sd^2)` once per imputation when every
/// deviator's final visit carries one δ: `-pi_d^2 sd^2`.
pub fn stochastic_delta_gap(share_deviating: f64, sd: f64) -> f64 {
    -(share_deviating * sd).powi(2)
}

/// As [`stochastic_delta_gap`] when the final-visit offset for deviators at
/// visit `j` is `(J + 1 - j)` δ: `-(sum_j pi_j (J + 1 - j))^2 sd^2`.
/// `shares` holds `(first unobserved visit, share)`.
pub fn stochastic_delta_gap_by_visit(shares: &[(usize, f64)], n_visits: usize, sd: f64) -> f64 {
    let m: f64 = shares.iter().map(|&(j, pi)| pi * (n_visits + 1 - j) as f64).sum();
    -(m * sd).powi(2)
}

/// Magnitude scale of the neglected `O(n^-2)` remainder: `(E[B]/E[W]) / n^2`
/// with unit constant.
pub fn remainder_bound_scale(expected_between: f64, expected_within: f64, n: usize) -> f64 {
    expected_between / expected_within / (n as f64).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scheme(groups: Vec<DeviationGroup>) -> DeviationScheme {
        DeviationScheme {
            n: 20,
            n_visits: 3,
            groups,
            active_final_mean: 2.2,
            final_variance: 0.6,
            adjusted_variance: Some(0.6 - 0.2f64.powi(2) / 0.4),
        }
    }

    #[test]
    fn intro_information_examples() {
        assert_eq!(intro_information(100.0, 20.0, 1.0, 1.0), 100.0);
        assert!((intro_information(100.0, 20.0, 1.0, 2.25) - 80.0).abs() < 1e-12);
        assert_eq!(intro_information(100.0, 0.0, 2.0, 7.0), 50.0);
        let curve = intro_information_curve(100.0, 20.0, 1.0, &[0.5, 1.0, 2.25, 4.0]);
        assert!(curve.windows(2).all(|w| w[0].1 > w[1].1));
    }

    #[test]
    fn prop1_without_deviators() {
        let mut s = scheme(vec![]);
        s.n = 250;
        assert!((prop1_full_variance(&s, false).unwrap() - 0.0048).abs() < 1e-15);
        assert!((prop1_full_variance(&s, true).unwrap() - 2.0 * 0.5 / 250.0).abs() < 1e-15);
    }

    #[test]
    fn q_term_matches_prop1_with_delta_means() {
        let delta = -0.3;
        let groups = vec![(2, 3), (3, 4)];
        let s = scheme(
            groups
                .iter()
                .map(|&(j, c)| DeviationGroup {
                    visit: j,
                    count: c,
                    final_mean: 2.2 - (3 + 1 - j) as f64 * delta,
                })
                .collect(),
        );
        let q = delta_q_term(20, 13, &groups, delta, 3);
        let direct = prop1_full_variance(&s, false).unwrap() - 2.0 * 0.6 / 20.0;
        assert!((q - direct).abs() < 1e-15);
        assert_eq!(delta_q_term(20, 13, &groups, 0.0, 3), 0.0);
    }

    #[test]
    fn between_variance_single_pattern() {
        let p = BetweenPattern {
            share: 0.3,
            residual_variance: 0.5,
            count: 10,
            mean_predictor: DVector::from_element(1, 2.0),
            coef_cov: DMatrix::from_element(1, 1, 0.01),
        };
        let expected = 0.09 * (0.5 + 10.0 * 4.0 * 0.01) / 10.0;
        assert!((expected_between_variance(&[p.clone()]).unwrap() - expected).abs() < 1e-15);
        let zero = BetweenPattern { share: 0.0, ..p };
        assert_eq!(expected_between_variance(&[zero]).unwrap(), 0.0);
    }

    #[test]
    fn gap_vanishes_for_equal_covariances_and_matches_closed_form() {
        let s = DMatrix::from_row_slice(2, 2, &[1.2, -0.3, -0.3, 0.4]);
        let p = DVector::from_vec(vec![1.0, 2.0]);
        let same = GapPattern {
            share: 0.2,
            mean_predictor: p.clone(),
            coef_cov_primary: s.clone(),
            coef_cov_sensitivity: s.clone(),
        };
        assert_eq!(theorem1_gap(&[same]).unwrap(), 0.0);

        let (n, pi_d) = (250usize, 0.3);
        let n_o = n as f64 * (1.0 - pi_d);
        let general = GapPattern {
            share: pi_d,
            mean_predictor: p.clone(),
            coef_cov_primary: &s / n_o,
            coef_cov_sensitivity: &s / n as f64,
        };
        let a = theorem1_gap(&[general]).unwrap();
        let b = reference_observed_gap(&[(pi_d, p, s)], n, pi_d).unwrap();
        assert!((a - b).abs() < 1e-15 * a.abs().max(1.0));
    }

    #[test]
    fn stochastic_delta_gaps() {
        assert!((stochastic_delta_gap(0.3, 0.46) + 0.09 * 0.2116).abs() < 1e-15);
        // All deviation at the final visit reduces to the single-offset form.
        assert!((stochastic_delta_gap_by_visit(&[(3, 0.3)], 3, 0.46) - stochastic_delta_gap(0.3, 0.46)).abs() < 1e-15);
        let split = stochastic_delta_gap_by_visit(&[(2, 0.15), (3, 0.15)], 3, 0.46);
        assert!((split + (0.45f64 * 0.46).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let bad = GapPattern {
            share: 0.1,
            mean_predictor: DVector::zeros(2),
            coef_cov_primary: DMatrix::zeros(3, 3),
            coef_cov_sensitivity: DMatrix::zeros(3, 3),
        };
        assert!(matches!(theorem1_gap(&[bad]), Err(Error::DimensionMismatch(_))));
    }

    proptest! {
        #[test]
        fn prop1_symmetric_in_group_order(
            m2 in 0.0f64..4.0, m3 in 0.0f64..4.0, c2 in 0usize..8, c3 in 0usize..8,
        ) {
            let g2 = DeviationGroup { visit: 2, count: c2, final_mean: m2 };
            let g3 = DeviationGroup { visit: 3, count: c3, final_mean: m3 };
            let a = prop1_full_variance(&scheme(vec![g2, g3]), false).unwrap();
            let b = prop1_full_variance(&scheme(vec![g3, g2]), false).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
            let swapped = vec![
                DeviationGroup { final_mean: m3, ..g2 },
                DeviationGroup { final_mean: m2, ..g3 },
            ];
            let c = prop1_full_variance(&scheme(vec![
                DeviationGroup { count: c3, ..swapped[0] },
                DeviationGroup { count: c2, ..swapped[1] },
            ]), false).unwrap();
            prop_assert!((a - c).abs() < 1e-15);
        }
    }
}
