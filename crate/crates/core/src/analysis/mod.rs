//! Primary analysis (ANCOVA), Rubin's rules and information-anchoring
//! diagnostics.

mod ancova;
mod anchoring;
mod design;
mod pooling;

pub use ancova::{ancova, ancova_columns, AncovaFit};
pub use anchoring::{
    anchored_variance, classify_information, inflate_to_anchored, information_loss_fraction, AnchoringReport,
    Classification, DEFAULT_TOLERANCE,
};
pub use design::{controlled_point_estimate, jackknife_design_variance};
pub use pooling::{pool_rubin, pool_rubin_with, DfMethod, PooledEstimate};
