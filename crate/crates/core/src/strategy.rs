//! Controlled-imputation strategies and their compact text form.
//!
//! Grammar (case-insensitive method names):
//!
//! ```text
//! spec      := method [ "@" subsample ]
//! method    := "mar" | "j2r" | "cir" | "cr" | "lmcf"
//!            | "delta:" number                 (fixed offset)
//!            | "delta:" number "~" number      (mean ~ sd, offset drawn per imputation)
//! subsample := positive integer                (reference rows used per imputation)
//! ```

use std::fmt;
use std::str::FromStr;

use crate::data::Arm;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Mar,
    JumpToReference,
    CopyIncrementsInReference,
    CopyReference,
    LastMeanCarriedForward,
    /// Add `(t - d + 1) * delta` at each post-deviation visit `t`.
    DeltaFixed { delta: f64 },
    /// As `DeltaFixed` with `delta_k ~ N(mean, sd^2)` drawn once per imputation.
    DeltaStochastic { mean: f64, sd: f64 },
}

impl Method {
    pub fn is_reference_based(self) -> bool {
        matches!(
            self,
            Method::JumpToReference
                | Method::CopyIncrementsInReference
                | Method::CopyReference
                | Method::LastMeanCarriedForward
        )
    }

    pub fn is_delta(self) -> bool {
        matches!(self, Method::DeltaFixed { .. } | Method::DeltaStochastic { .. })
    }

    /// Whether the joint for deviators needs the reference arm's draw.
    pub fn uses_reference_draw(self) -> bool {
        matches!(
            self,
            Method::JumpToReference | Method::CopyIncrementsInReference | Method::CopyReference
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputationStrategy {
    pub method: Method,
    pub reference_arm: Arm,
    /// When set, each imputation draws the reference parameters from a fresh
    /// random subsample of this many reference subjects.
    pub reference_subsample: Option<usize>,
}

impl ImputationStrategy {
    pub fn new(method: Method) -> Self {
        ImputationStrategy {
            method,
            reference_arm: Arm::Reference,
            reference_subsample: None,
        }
    }

    pub fn mar() -> Self {
        Self::new(Method::Mar)
    }

    pub fn active_arm(&self) -> Arm {
        self.reference_arm.other()
    }

    pub fn with_subsample(mut self, n: usize) -> Self {
        self.reference_subsample = Some(n);
        self
    }

    pub fn validate(&self, n_reference: usize) -> Result<()> {
        if let Method::DeltaStochastic { sd, mean } = self.method {
            if !(sd >= 0.0) || !sd.is_finite() || !mean.is_finite() {
                return Err(Error::StrategySpec(format!("delta sd must be finite and >= 0, got {sd}")));
            }
        }
        if let Method::DeltaFixed { delta } = self.method {
            if !delta.is_finite() {
                return Err(Error::StrategySpec(format!("delta must be finite, got {delta}")));
            }
        }
        if let Some(m) = self.reference_subsample {
            if m == 0 || m > n_reference {
                return Err(Error::StrategySpec(format!(
                    "reference subsample {m} must be in 1..={n_reference}"
                )));
            }
        }
        Ok(())
    }

    /// Short machine-friendly label used in reports (`j2r`, `delta:-0.5`, ...).
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ImputationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            Method::Mar => f.write_str("mar")?,
            Method::JumpToReference => f.write_str("j2r")?,
            Method::CopyIncrementsInReference => f.write_str("cir")?,
            Method::CopyReference => f.write_str("cr")?,
            Method::LastMeanCarriedForward => f.write_str("lmcf")?,
            Method::DeltaFixed { delta } => write!(f, "delta:{delta}")?,
            Method::DeltaStochastic { mean, sd } => write!(f, "delta:{mean}~{sd}")?,
        }
        if let Some(m) = self.reference_subsample {
            write!(f, "@{m}")?;
        }
        Ok(())
    }
}

impl FromStr for ImputationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::StrategySpec(s.to_string());
        let s_trim = s.trim();
        let (body, sub) = match s_trim.split_once('@') {
            Some((b, n)) => (b, Some(n.trim().parse::<usize>().map_err(|_| bad())?)),
            None => (s_trim, None),
        };
        let lower = body.trim().to_ascii_lowercase();
        let method = match lower.as_str() {
            "mar" => Method::Mar,
            "j2r" => Method::JumpToReference,
            "cir" => Method::CopyIncrementsInReference,
            "cr" => Method::CopyReference,
            "lmcf" => Method::LastMeanCarriedForward,
            other => {
                let rest = other.strip_prefix("delta:").ok_or_else(bad)?;
                match rest.split_once('~') {
                    Some((m, sd)) => Method::DeltaStochastic {
                        mean: m.trim().parse().map_err(|_| bad())?,
                        sd: sd.trim().parse().map_err(|_| bad())?,
                    },
                    None => Method::DeltaFixed {
                        delta: rest.trim().parse().map_err(|_| bad())?,
                    },
                }
            }
        };
        let st = ImputationStrategy {
            method,
            reference_arm: Arm::Reference,
            reference_subsample: sub,
        };
        if sub == Some(0) {
            return Err(bad());
        }
        if let Method::DeltaStochastic { sd, .. } = method {
            if !(sd >= 0.0) {
                return Err(bad());
            }
        }
        Ok(st)
    }
}
