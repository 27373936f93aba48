use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::SimConfig;
use super::replicate::{run_replicate, ReplicateResult, StrategyOutcome, ESTIMATORS};
use crate::error::{Error, Result};

pub const STUDY_HEADER: &str = "strategy,dropout_pct,estimator,mean,mc_se,replicates";

/// Mean and Monte Carlo standard error of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub dropout_pct: f64,
    pub estimator: &'static str,
    pub mean: f64,
    /// `sd / sqrt(R)`; NaN when `R = 1`.
    pub mc_se: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: SimConfig,
    /// Successful replicates in index order.
    pub replicates: Vec<ReplicateResult>,
    pub failures: Vec<Error>,
    pub summary: Vec<SummaryRow>,
}

/// Mean and MC standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl StudyResult {
    /// Per-replicate outcomes for one strategy label and level index.
    pub fn outcomes(&self, strategy: &str, level: usize) -> Vec<&StrategyOutcome> {
        self.replicates
            .iter()
            .filter_map(|r| r.levels.get(level)?.strategies.iter().find(|s| s.strategy.to_string() == strategy))
            .collect()
    }

    pub fn values(&self, strategy: &str, level: usize, estimator: &str) -> Vec<f64> {
        self.outcomes(strategy, level)
            .iter()
            .filter_map(|o| o.value(estimator))
            .collect()
    }

    pub fn row(&self, strategy: &str, dropout_pct: f64, estimator: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.strategy == strategy && r.dropout_pct == dropout_pct && r.estimator == estimator)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(STUDY_HEADER);
        s.push('\n');
        for r in &self.summary {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.strategy, r.dropout_pct, r.estimator, r.mean, r.mc_se, r.replicates
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// One line per failed replicate; empty when all succeeded.
    pub fn failure_report(&self) -> String {
        self.failures.iter().map(|e| format!("{e}\n")).collect()
    }
}

fn summarize(config: &SimConfig, replicates: &[ReplicateResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    if replicates.is_empty() {
        return rows;
    }
    for strategy in &config.strategies {
        let label = strategy.to_string();
        for (l, &pct) in config.dropout_pct.iter().enumerate() {
            for estimator in ESTIMATORS {
                let xs: Vec<f64> = replicates
                    .iter()
                    .filter_map(|r| {
                        r.levels[l]
                            .strategies
                            .iter()
                            .find(|s| s.strategy == *strategy)
                            .and_then(|s| s.value(estimator))
                    })
                    .collect();
                let (mean, mc_se) = mean_and_se(&xs);
                rows.push(SummaryRow {
                    strategy: label.clone(),
                    dropout_pct: pct,
                    estimator,
                    mean,
                    mc_se,
                    replicates: xs.len(),
                });
            }
        }
    }
    rows
}

/// Run all replicates (in parallel on the current rayon pool) and summarise.
///
/// Failed replicates are reported in `failures` and left out of the
/// summary; the study fails only when no replicate succeeds.
pub fn run_study(config: &SimConfig) -> Result<StudyResult> {
    config.validate()?;
    let results: Vec<Result<ReplicateResult>> =
        (0..config.replicates).into_par_iter().map(|r| run_replicate(config, r)).collect();
    let mut replicates = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(v) => replicates.push(v),
            Err(e) => failures.push(e),
        }
    }
    if replicates.is_empty() {
        return Err(failures.into_iter().next().expect("at least one replicate"));
    }
    let summary = summarize(config, &replicates);
    Ok(StudyResult {
        config: config.clone(),
        replicates,
        failures,
        summary,
    })
}
