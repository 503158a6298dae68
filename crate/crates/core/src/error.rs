use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading, validating or solving a scenario.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field failed validation. `field` is a dotted path
    /// such as `users[1].gop.dus[2].size_pmf`.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("state space too large: {0}")]
    Sizing(SizingReport),

    #[error("did not converge after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },

    #[error("infeasible action: {0}")]
    InfeasibleAction(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scenario json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Json(_) | Error::Sizing(_) => 2,
            Error::NonConvergence { .. } => 3,
            _ => 1,
        }
    }
}

/// Describes why a tabular solve was refused.
#[derive(Debug, Clone, PartialEq)]
pub struct SizingReport {
    pub what: String,
    pub states: u128,
    pub budget: u128,
    pub breakdown: Vec<(String, u128)>,
}

impl std::fmt::Display for SizingReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} needs {} states, budget is {}",
            self.what, self.states, self.budget
        )?;
        for (name, n) in &self.breakdown {
            write!(f, "; {name}={n}")?;
        }
        Ok(())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
