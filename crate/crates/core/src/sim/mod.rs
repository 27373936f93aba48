//! Monte Carlo harness: simulate trials, impose dropout, run every strategy
//! on common random numbers and compare the variance estimators.

mod config;
mod generate;
mod replicate;
mod study;

pub use config::SimConfig;
pub use generate::{draw_counterfactual, dropout_count, generate_trial, impose_dropout};
pub use replicate::{run_replicate, LevelOutcome, ReplicateResult, StrategyOutcome, ESTIMATORS};
pub use study::{mean_and_se, run_study, StudyResult, SummaryRow, STUDY_HEADER};
