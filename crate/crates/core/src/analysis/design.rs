//! Design-based (long-run) variance of a controlled-imputation estimate.
//!
//! With infinitely many imputations the MI point estimate is the ANCOVA
//! effect computed after replacing every missing final-visit value by its
//! conditional mean under the strategy, at the maximum-likelihood
//! parameters. Its sampling variance is what the conventional primary
//! analysis variance estimator targets; here it is estimated by a grouped
//! delete-a-group jackknife that refits both arms in every replicate.

use super::ancova::ancova_columns;
use crate::data::{Arm, TrialDataset};
use crate::error::{Error, Result};
use crate::impute::build_joint;
use crate::mvn::{factored_mle, ConditionalMap, MonotoneRows, MvnParams};
use crate::strategy::{ImputationStrategy, Method};

struct ArmData {
    rows: MonotoneRows,
    members: Vec<usize>,
}

fn arm_data(data: &TrialDataset) -> Result<[ArmData; 2]> {
    let build = |arm: Arm| -> Result<ArmData> {
        Ok(ArmData {
            rows: MonotoneRows::from_rows(&data.arm_rows(arm))?,
            members: data.subjects_in(arm).collect(),
        })
    };
    Ok([build(Arm::Reference)?, build(Arm::Active)?])
}

fn final_offset(method: Method, last_observed: usize, n_visits: usize) -> f64 {
    let steps = (n_visits - last_observed) as f64;
    match method {
        Method::DeltaFixed { delta } => steps * delta,
        Method::DeltaStochastic { mean, .. } => steps * mean,
        _ => 0.0,
    }
}

fn effect_excluding(
    data: &TrialDataset,
    arms: &[ArmData; 2],
    strategy: &ImputationStrategy,
    keep: impl Fn(usize) -> bool,
) -> Result<f64> {
    let j = data.n_visits();
    let fits: Vec<MvnParams> = arms
        .iter()
        .map(|a| factored_mle(&a.rows, |local| keep(a.members[local])))
        .collect::<Result<_>>()?;
    let ref_arm = strategy.reference_arm;
    let method = if strategy.method.is_delta() { Method::Mar } else { strategy.method };
    let mut maps: [Vec<Option<ConditionalMap>>; 2] = [vec![None; j], vec![None; j]];
    let mut baseline = Vec::with_capacity(data.n_subjects());
    let mut outcome = Vec::with_capacity(data.n_subjects());
    let mut active = Vec::with_capacity(data.n_subjects());
    let mut obs = vec![0.0; j];
    let mut tail = vec![0.0; j];
    for (a, arm_data) in arms.iter().enumerate() {
        let arm = Arm::ALL[a];
        for (local, &i) in arm_data.members.iter().enumerate() {
            if !keep(i) {
                continue;
            }
            let d = arm_data.rows.n_obs[local];
            let row = arm_data.rows.row(local);
            let y = if d == j {
                row[j - 1]
            } else {
                let slot = &mut maps[a][d];
                if slot.is_none() {
                    let own = &fits[a];
                    let spec = if arm == ref_arm {
                        build_joint(Method::Mar, own, own, d)?
                    } else {
                        build_joint(method, own, &fits[ref_arm.index()], d)?
                    };
                    *slot = Some(ConditionalMap::new(&spec.params, d)?);
                }
                obs[..d].copy_from_slice(&row[..d]);
                slot.as_ref().expect("filled above").mean_into(&obs[..d], &mut tail[..j - d]);
                let shift = if arm == ref_arm { 0.0 } else { final_offset(strategy.method, d, j) };
                tail[j - d - 1] + shift
            };
            baseline.push(row[0]);
            outcome.push(y);
            active.push(arm == Arm::Active);
        }
    }
    Ok(ancova_columns(&baseline, &outcome, &active)?.effect)
}

/// Treatment effect with missing final values replaced by their
/// conditional means under the strategy at the ML parameters.
pub fn controlled_point_estimate(data: &TrialDataset, strategy: &ImputationStrategy) -> Result<f64> {
    effect_excluding(data, &arm_data(data)?, strategy, |_| true)
}

/// Delete-a-group jackknife variance of [`controlled_point_estimate`];
/// subject `i` belongs to group `i mod groups`.
pub fn jackknife_design_variance(data: &TrialDataset, strategy: &ImputationStrategy, groups: usize) -> Result<f64> {
    if groups < 2 || groups > data.n_subjects() {
        return Err(Error::Config(format!("jackknife needs 2..={} groups, got {groups}", data.n_subjects())));
    }
    let arms = arm_data(data)?;
    let estimates: Vec<f64> = (0..groups)
        .map(|g| effect_excluding(data, &arms, strategy, |i| i % groups != g))
        .collect::<Result<_>>()?;
    let gf = groups as f64;
    let mean = estimates.iter().sum::<f64>() / gf;
    Ok((gf - 1.0) / gf * estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>())
}
