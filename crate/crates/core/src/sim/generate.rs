use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::config::SimConfig;
use crate::data::{Arm, TrialDataset};
use crate::error::{Error, Result};
use crate::impute::build_joint;
use crate::mvn::{ConditionalMap, MvnParams};
use crate::strategy::{ImputationStrategy, Method};

/// `n_per_arm` reference subjects followed by `n_per_arm` active subjects,
/// each an independent draw from its arm's true distribution.
pub fn generate_trial<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<TrialDataset> {
    let j = config.n_visits();
    let n = config.n_per_arm;
    let mut arms = Vec::with_capacity(2 * n);
    let mut cells = Vec::with_capacity(2 * n * j);
    let mut ids = Vec::with_capacity(2 * n);
    for arm in Arm::ALL {
        let p = config.params(arm);
        let l = p.cov.clone().cholesky().ok_or(Error::NotPositiveDefinite { context: "generating covariance" })?.l();
        for i in 0..n {
            let z = DVector::from_fn(j, |_, _| StandardNormal.sample(rng));
            let y = &p.mean + &l * z;
            cells.extend(y.iter().map(|&v| Some(v)));
            arms.push(arm);
            ids.push(format!("{}{:04}", arm.label(), i + 1));
        }
    }
    TrialDataset::new(j, ids, arms, cells)
}

/// Number of subjects for a proportion: `proportion * n` rounded half up.
pub fn dropout_count(proportion: f64, n: usize) -> usize {
    // The small slack keeps products such as 0.15 * 250 on the half.
    (proportion * n as f64 + 0.5 + 1e-9).floor() as usize
}

/// Blank the tails of randomly chosen subjects of `arm`.
///
/// `proportions[b]` is the share whose first unobserved visit is `b + 2`
/// (1-based). One permutation of the arm is drawn and cut into consecutive
/// buckets, so buckets never overlap.
pub fn impose_dropout<R: Rng + ?Sized>(
    data: &TrialDataset,
    arm: Arm,
    proportions: &[f64],
    rng: &mut R,
) -> Result<TrialDataset> {
    let j = data.n_visits();
    if proportions.len() != j - 1 {
        return Err(Error::InfeasibleProportions(format!(
            "{} proportions for {} visits",
            proportions.len(),
            j
        )));
    }
    if let Some(p) = proportions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InfeasibleProportions(format!("proportion {p} outside [0, 1]")));
    }
    let mut members: Vec<usize> = data.subjects_in(arm).collect();
    let counts: Vec<usize> = proportions.iter().map(|&p| dropout_count(p, members.len())).collect();
    let total: usize = counts.iter().sum();
    if total > members.len() {
        return Err(Error::InfeasibleProportions(format!(
            "{total} deviators requested from {} subjects",
            members.len()
        )));
    }
    let mut out = data.clone();
    if total == 0 {
        return Ok(out);
    }
    members.shuffle(rng);
    let mut chosen = members.into_iter();
    for (b, &c) in counts.iter().enumerate() {
        for i in chosen.by_ref().take(c) {
            out.truncate_subject(i, b + 1);
        }
    }
    Ok(out)
}

/// Complete data as they would have been observed under the strategy.
///
/// Each deviator's post-deviation values are re-expressed through the
/// innovations of the true MAR conditional and mapped through the true
/// conditional of the strategy's joint, so every strategy reuses the same
/// randomness. δ-strategies add the per-visit offsets to the actual values;
/// a stochastic δ is drawn once from `rng`.
pub fn draw_counterfactual<R: Rng + ?Sized>(
    complete: &TrialDataset,
    last_observed: &[usize],
    strategy: &ImputationStrategy,
    truth: [&MvnParams; 2],
    rng: &mut R,
) -> Result<TrialDataset> {
    let j = complete.n_visits();
    let active = strategy.active_arm();
    let mut out = complete.clone();
    let delta = match strategy.method {
        Method::DeltaFixed { delta } => delta,
        Method::DeltaStochastic { mean, sd } if sd > 0.0 => {
            Normal::new(mean, sd).map_err(|e| Error::StrategySpec(e.to_string()))?.sample(rng)
        }
        Method::DeltaStochastic { mean, .. } => mean,
        _ => 0.0,
    };
    if strategy.method == Method::Mar || (strategy.method.is_delta() && delta == 0.0) {
        return Ok(out);
    }
    let own = truth[active.index()];
    let reference = truth[strategy.reference_arm.index()];
    let mut maps: Vec<Option<(ConditionalMap, ConditionalMap)>> = vec![None; j];
    let mut z = vec![0.0; j];
    let mut obs = vec![0.0; j];
    let mut tail = vec![0.0; j];
    for i in 0..complete.n_subjects() {
        let d = last_observed[i];
        if d >= j || complete.arm(i) != active {
            continue;
        }
        let row = out.row_mut(i);
        if strategy.method.is_delta() {
            for (t, c) in row.iter_mut().enumerate().skip(d) {
                *c = c.map(|v| v + (t - d + 1) as f64 * delta);
            }
            continue;
        }
        if maps[d].is_none() {
            let mar = ConditionalMap::new(own, d)?;
            let spec = build_joint(strategy.method, own, reference, d)?;
            maps[d] = Some((mar, ConditionalMap::new(&spec.params, d)?));
        }
        let (mar, controlled) = maps[d].as_ref().expect("filled above");
        let m = j - d;
        for (o, c) in obs.iter_mut().zip(&row[..d]) {
            *o = c.ok_or(Error::IncompleteData)?;
        }
        for (o, c) in tail.iter_mut().zip(&row[d..]) {
            *o = c.ok_or(Error::IncompleteData)?;
        }
        mar.innovations(&obs[..d], &tail[..m], &mut z[..m]);
        controlled.sample_into(&obs[..d], &z[..m], &mut tail[..m]);
        for (c, v) in row[d..].iter_mut().zip(&tail[..m]) {
            *c = Some(*v);
        }
    }
    Ok(out)
}
