use thiserror::Error;

use crate::data::Violation;

/// Errors raised by estimation, imputation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dataset failed validation with {} violation(s)", .0.len())]
    Validation(Vec<Violation>),

    #[error("malformed input at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("arm has {completers} completers but at least {required} are needed for a full-rank covariance")]
    RankDeficient { completers: usize, required: usize },

    #[error("covariance draw not positive definite after {attempts} attempts")]
    NonPositiveDefiniteDraw { attempts: usize },

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("observed block of the covariance is singular")]
    SingularObservedBlock,

    #[error("pre-deviation block of the reference covariance is singular")]
    SingularPartition,

    #[error("subject {subject}: {source}")]
    Subject {
        subject: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("delta adjustment requires MAR base completions, got {found}")]
    StrategyMismatch { found: String },

    #[error("dataset has missing cells; ANCOVA needs complete data")]
    IncompleteData,

    #[error("ANCOVA design matrix is collinear")]
    CollinearDesign,

    #[error("at least 2 imputations are required, got {0}")]
    TooFewImputations(usize),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("standard error must be positive, got {0}")]
    NonPositiveSe(f64),

    #[error("anchored variance {anchored} is below the ML variance {ml}")]
    VarianceOrderViolation { ml: f64, anchored: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dropout proportions are infeasible: {0}")]
    InfeasibleProportions(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid strategy spec `{0}`")]
    StrategySpec(String),

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn for_subject(subject: usize, err: Error) -> Self {
        Error::Subject {
            subject,
            source: Box::new(err),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::RankDeficient { .. }
            | Error::NonPositiveDefiniteDraw { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::SingularObservedBlock
            | Error::SingularPartition
            | Error::CollinearDesign => true,
            Error::Subject { source, .. } | Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
