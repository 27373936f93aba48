//! Controlled multiple imputation for longitudinal two-arm trials.
//!
//! The crate covers the full pipeline: monotone-missing trial data, MAR
//! posterior draws for each arm, reference-based and delta-adjusted
//! imputation, ANCOVA with Rubin's rules, information-anchoring diagnostics,
//! closed-form expectations used as oracles, and a Monte Carlo harness that
//! compares the variance estimators over simulated trials.

pub mod analysis;
pub mod data;
pub mod error;
pub mod impute;
pub mod io;
pub mod kv;
pub mod mvn;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod strategy;

pub use analysis::{
    anchored_variance, ancova, classify_information, inflate_to_anchored, information_loss_fraction,
    pool_rubin, AncovaFit, AnchoringReport, Classification, DfMethod, PooledEstimate,
};
pub use data::{summarize_missingness, validate_dataset, Arm, MissingnessSummary, RawDataset, TrialDataset};
pub use error::{Error, Result};
pub use impute::{build_joint, run_controlled_mi, ImputationEngine, ImputedSet, JointSpec, MiConfig};
pub use mvn::{ChainConfig, MvnParams, PosteriorDraw};
pub use strategy::{ImputationStrategy, Method};
