use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};

use super::delta::{apply_delta, delta_offset};
use super::joint::build_joint;
use crate::data::{Arm, TrialDataset};
use crate::error::{Error, Result};
use crate::mvn::{ChainConfig, ConditionalMap, MvnParams, PosteriorDraw, PosteriorSampler};
use crate::rng::{stream, Domain, StreamRng};
use crate::strategy::{ImputationStrategy, Method};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiConfig {
    /// Number of imputations.
    pub k: usize,
    pub chain: ChainConfig,
    pub seed: u64,
}

impl MiConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        MiConfig {
            k,
            chain: ChainConfig::default(),
            seed,
        }
    }
}

/// Source of the standard-normal innovations for imputation `k`: one stream
/// per subject, so a subject's draws do not depend on who else deviates and
/// are shared by every strategy run with the same seed.
#[derive(Debug, Clone, Copy)]
pub struct SubjectStreams {
    pub seed: u64,
    pub k: usize,
}

impl SubjectStreams {
    pub fn for_subject(&self, i: usize) -> StreamRng {
        stream(self.seed, Domain::Imputation, &[self.k as u64, i as u64])
    }
}

/// Complete one dataset from one posterior draw.
///
/// Deviators in the active arm follow `strategy`; reference-arm deviators
/// are imputed under within-arm MAR. `reference` replaces the reference
/// draw inside active-arm joints (used for subsampled reference fits). Delta
/// strategies impute under MAR here; see [`apply_delta`] for the offsets.
pub fn impute_once(
    dataset: &TrialDataset,
    strategy: &ImputationStrategy,
    draw: &PosteriorDraw,
    reference: Option<&MvnParams>,
    streams: SubjectStreams,
) -> Result<TrialDataset> {
    let j = dataset.n_visits();
    let ref_arm = strategy.reference_arm;
    let joint_reference = reference.unwrap_or(draw.arm(ref_arm));
    let method = if strategy.method.is_delta() { Method::Mar } else { strategy.method };
    let mut maps: [Vec<Option<ConditionalMap>>; 2] = [vec![None; j], vec![None; j]];
    let mut out = dataset.clone();
    let mut z = vec![0.0; j];
    let mut tail = vec![0.0; j];
    let mut obs = vec![0.0; j];
    for i in 0..dataset.n_subjects() {
        let d = dataset.n_observed(i);
        if d == j {
            continue;
        }
        let arm = dataset.arm(i);
        let slot = &mut maps[arm.index()][d];
        if slot.is_none() {
            let own = draw.arm(arm);
            let spec = if arm == ref_arm {
                build_joint(Method::Mar, own, own, d)
            } else {
                build_joint(method, own, joint_reference, d)
            }
            .map_err(|e| Error::for_subject(i, e))?;
            *slot = Some(ConditionalMap::new(&spec.params, d).map_err(|e| Error::for_subject(i, e))?);
        }
        let map = slot.as_ref().expect("filled above");
        let m = j - d;
        let mut rng = streams.for_subject(i);
        for zi in &mut z[..m] {
            *zi = StandardNormal.sample(&mut rng);
        }
        let row = out.row_mut(i);
        for (o, c) in obs.iter_mut().zip(&row[..d]) {
            *o = c.expect("monotone prefix observed");
        }
        map.sample_into(&obs[..d], &z[..m], &mut tail[..m]);
        for (c, v) in row[d..].iter_mut().zip(&tail[..m]) {
            *c = Some(*v);
        }
    }
    Ok(out)
}

/// K completed datasets plus what is needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedSet {
    pub completions: Vec<TrialDataset>,
    pub strategy: ImputationStrategy,
    /// Index of the posterior draw behind each completion.
    pub draw_indices: Vec<usize>,
    /// Offset applied to each completion (zero unless the strategy is δ-based).
    pub deltas: Vec<f64>,
    pub seed: u64,
    pub chain: ChainConfig,
}

impl ImputedSet {
    pub fn k(&self) -> usize {
        self.completions.len()
    }
}

/// Posterior draws for both arms, computed once and reusable across
/// strategies, so that all strategies share draws and innovations.
pub struct ImputationEngine<'a> {
    dataset: &'a TrialDataset,
    config: MiConfig,
    draws: Vec<PosteriorDraw>,
    last_observed: Vec<usize>,
}

impl<'a> ImputationEngine<'a> {
    pub fn new(dataset: &'a TrialDataset, config: MiConfig) -> Result<Self> {
        if config.k < 2 {
            return Err(Error::TooFewImputations(config.k));
        }
        let mut per_arm = Vec::with_capacity(2);
        for arm in Arm::ALL {
            let rows = dataset.arm_rows(arm);
            let rng = stream(config.seed, Domain::Chain, &[arm.index() as u64]);
            let mut sampler = PosteriorSampler::new(&rows, config.chain, rng)?;
            let draws = (0..config.k).map(|_| sampler.next_draw()).collect::<Result<Vec<_>>>()?;
            per_arm.push(draws);
        }
        let active = per_arm.pop().expect("two arms");
        let reference = per_arm.pop().expect("two arms");
        let draws = reference
            .into_iter()
            .zip(active)
            .enumerate()
            .map(|(index, (reference, active))| PosteriorDraw {
                index,
                reference,
                active,
            })
            .collect();
        let last_observed = (0..dataset.n_subjects()).map(|i| dataset.n_observed(i)).collect();
        Ok(ImputationEngine {
            dataset,
            config,
            draws,
            last_observed,
        })
    }

    pub fn config(&self) -> MiConfig {
        self.config
    }

    pub fn dataset(&self) -> &TrialDataset {
        self.dataset
    }

    pub fn draws(&self) -> &[PosteriorDraw] {
        &self.draws
    }

    pub fn last_observed(&self) -> &[usize] {
        &self.last_observed
    }

    /// Reference parameters fitted to a fresh random subsample of `size`
    /// reference subjects, for imputation `k`.
    fn subsample_reference(&self, arm: Arm, size: usize, k: usize) -> Result<MvnParams> {
        let members: Vec<usize> = self.dataset.subjects_in(arm).collect();
        let mut rng = stream(self.config.seed, Domain::Subsample, &[k as u64]);
        let mut picked: Vec<usize> = sample(&mut rng, members.len(), size).into_vec();
        picked.sort_unstable();
        let rows: Vec<Vec<Option<f64>>> = picked.iter().map(|&p| self.dataset.row(members[p]).to_vec()).collect();
        let chain_rng = stream(self.config.seed, Domain::Subsample, &[k as u64, 1]);
        PosteriorSampler::new(&rows, self.config.chain, chain_rng)?.next_draw()
    }

    /// Completion `k` (0-based) under `strategy`, with the δ offset applied.
    pub fn complete(&self, strategy: &ImputationStrategy, k: usize) -> Result<(TrialDataset, f64)> {
        let draw = &self.draws[k];
        let reference = match strategy.reference_subsample {
            Some(size) if strategy.method.uses_reference_draw() => {
                Some(self.subsample_reference(strategy.reference_arm, size, k)?)
            }
            _ => None,
        };
        let streams = SubjectStreams {
            seed: self.config.seed,
            k,
        };
        let base = impute_once(self.dataset, strategy, draw, reference.as_ref(), streams)?;
        if !strategy.method.is_delta() {
            return Ok((base, 0.0));
        }
        let delta = delta_offset(strategy.method, self.config.seed, k);
        let shifted = apply_delta(&base, Method::Mar, &self.last_observed, strategy.active_arm(), delta)?;
        Ok((shifted, delta))
    }

    pub fn run(&self, strategy: &ImputationStrategy) -> Result<ImputedSet> {
        strategy.validate(self.dataset.n_in_arm(strategy.reference_arm))?;
        let mut completions = Vec::with_capacity(self.config.k);
        let mut deltas = Vec::with_capacity(self.config.k);
        for k in 0..self.config.k {
            let (c, d) = self.complete(strategy, k)?;
            completions.push(c);
            deltas.push(d);
        }
        Ok(ImputedSet {
            completions,
            strategy: *strategy,
            draw_indices: (0..self.config.k).collect(),
            deltas,
            seed: self.config.seed,
            chain: self.config.chain,
        })
    }
}

/// Fit the per-arm posteriors and produce `config.k` completions.
pub fn run_controlled_mi(dataset: &TrialDataset, strategy: &ImputationStrategy, config: MiConfig) -> Result<ImputedSet> {
    strategy.validate(dataset.n_in_arm(strategy.reference_arm))?;
    ImputationEngine::new(dataset, config)?.run(strategy)
}
