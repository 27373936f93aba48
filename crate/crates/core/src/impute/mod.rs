//! Controlled multiple imputation: per-arm posterior draws, strategy-specific
//! joint distributions for deviators, and the δ-adjustment path.

mod delta;
mod engine;
mod export;
mod joint;

pub use delta::{apply_delta, delta_offset};
pub use engine::{impute_once, run_controlled_mi, ImputationEngine, ImputedSet, MiConfig, SubjectStreams};
pub use export::{imputation_file_name, MANIFEST_FILE, read_manifest, write_imputed_set, ImputedManifest};
pub use joint::{build_joint, reference_conditional_covariance, JointSpec};
