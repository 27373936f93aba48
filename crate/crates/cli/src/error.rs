//! CLI failures, exit codes and the JSON-lines error log on stderr.

use std::fmt;

use anchormi::Error;
use serde_json::{json, Value};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    UnknownFormula(String),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::UnknownFormula(name) => write!(f, "unknown formula `{name}`"),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

fn is_validation(e: &Error) -> bool {
    match e {
        Error::Validation(_)
        | Error::Parse { .. }
        | Error::StrategySpec(_)
        | Error::Config(_)
        | Error::InfeasibleProportions(_)
        | Error::TooFewImputations(_)
        | Error::DimensionMismatch(_) => true,
        Error::Subject { source, .. } | Error::Replicate { source, .. } => is_validation(source),
        _ => false,
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Validation(_) => "validation",
        Error::Parse { .. } => "parse",
        Error::StrategySpec(_) => "strategy_spec",
        Error::Config(_) => "config",
        Error::InfeasibleProportions(_) => "infeasible_proportions",
        Error::Io(_) => "io",
        Error::Subject { source, .. } | Error::Replicate { source, .. } => kind(source),
        e if e.is_numerical() => "numerical",
        _ => "other",
    }
}

impl CliError {
    /// 2 for bad inputs, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if is_validation(e) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Usage(_) | CliError::UnknownFormula(_) => 2,
            CliError::Core(_) => 1,
        }
    }

    /// One JSON object per line; a validation failure yields one line per violation.
    pub fn json_lines(&self) -> Vec<Value> {
        match self {
            CliError::Core(Error::Validation(violations)) => violations
                .iter()
                .map(|v| {
                    json!({
                        "error": "validation",
                        "subject": v.subject,
                        "row": v.subject + 2,
                        "visit": v.visit,
                        "kind": format!("{:?}", v.kind),
                        "message": v.to_string(),
                    })
                })
                .collect(),
            CliError::Core(Error::Parse { row, message }) => {
                vec![json!({"error": "parse", "row": row, "message": message})]
            }
            CliError::Core(e) => vec![json!({"error": kind(e), "message": e.to_string()})],
            CliError::UnknownFormula(name) => {
                vec![json!({"error": "unknown_formula", "formula": name, "message": self.to_string()})]
            }
            CliError::Usage(m) => vec![json!({"error": "usage", "message": m})],
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
