use rand_distr::{Distribution, Normal};

use crate::data::{Arm, TrialDataset};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::strategy::Method;

/// Offset applied in imputation `k` (0-based): the fixed δ, or one draw from
/// `N(mean, sd^2)` on a stream of its own so that the underlying MAR
/// imputations are unaffected.
pub fn delta_offset(method: Method, seed: u64, k: usize) -> f64 {
    match method {
        Method::DeltaFixed { delta } => delta,
        Method::DeltaStochastic { mean, sd } if sd > 0.0 => {
            let normal = Normal::new(mean, sd).expect("sd validated finite and positive");
            normal.sample(&mut stream(seed, Domain::Delta, &[k as u64]))
        }
        Method::DeltaStochastic { mean, .. } => mean,
        _ => 0.0,
    }
}

/// Shift the imputed cells of `arm` deviators in a MAR completion.
///
/// `last_observed[i]` is subject `i`'s number of observed visits in the
/// incomplete data. The cell at 0-based visit `t >= d` gets `(t - d + 1) * delta`.
pub fn apply_delta(
    completed: &TrialDataset,
    base_method: Method,
    last_observed: &[usize],
    arm: Arm,
    delta: f64,
) -> Result<TrialDataset> {
    if base_method != Method::Mar {
        return Err(Error::StrategyMismatch {
            found: format!("{base_method:?}"),
        });
    }
    if last_observed.len() != completed.n_subjects() {
        return Err(Error::DimensionMismatch("deviation pattern length".into()));
    }
    let mut out = completed.clone();
    if delta == 0.0 {
        return Ok(out);
    }
    let j = completed.n_visits();
    for i in 0..out.n_subjects() {
        let d = last_observed[i];
        if out.arm(i) != arm || d >= j {
            continue;
        }
        let row = out.row_mut(i);
        for (t, cell) in row.iter_mut().enumerate().skip(d) {
            if let Some(v) = cell {
                *v += (t - d + 1) as f64 * delta;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn completed() -> TrialDataset {
        TrialDataset::from_complete_rows(
            vec![Arm::Active, Arm::Active, Arm::Reference],
            &[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]],
        )
        .unwrap()
    }

    #[test]
    fn visit_two_deviator_gets_one_and_two_deltas() {
        let out = apply_delta(&completed(), Method::Mar, &[1, 3, 1], Arm::Active, -0.5).unwrap();
        assert_eq!(out.row(0), &[Some(1.0), Some(1.5), Some(2.0)]);
        assert_eq!(out.row(1), &[Some(1.0), Some(2.0), Some(3.0)]);
        // Reference-arm deviator untouched.
        assert_eq!(out.row(2), &[Some(1.0), Some(2.0), Some(3.0)]);
    }

    #[test]
    fn zero_delta_is_identity() {
        let c = completed();
        assert_eq!(apply_delta(&c, Method::Mar, &[1, 2, 1], Arm::Active, 0.0).unwrap(), c);
    }

    #[test]
    fn non_mar_base_rejected() {
        let err = apply_delta(&completed(), Method::JumpToReference, &[1, 3, 3], Arm::Active, 1.0);
        assert!(matches!(err, Err(Error::StrategyMismatch { .. })));
    }

    #[test]
    fn stochastic_offsets_have_requested_spread() {
        let m = Method::DeltaStochastic { mean: -0.21, sd: 0.46 };
        let k = 20_000;
        let xs: Vec<f64> = (0..k).map(|i| delta_offset(m, 5, i)).collect();
        let mean = xs.iter().sum::<f64>() / k as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        let target = 0.46f64.powi(2);
        // Var of the sample variance of normals is 2 sigma^4 / (k - 1).
        let se = (2.0 * target * target / (k - 1) as f64).sqrt();
        assert!((var - target).abs() < 3.0 * se, "{var} vs {target}");
        assert!((mean + 0.21).abs() < 3.0 * 0.46 / (k as f64).sqrt());
        assert_eq!(delta_offset(m, 5, 7), delta_offset(m, 5, 7));
        assert_eq!(delta_offset(Method::DeltaStochastic { mean: 0.3, sd: 0.0 }, 5, 1), 0.3);
    }
}
