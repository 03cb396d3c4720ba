use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::divergence::DivergenceKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    InvalidInput(String),
    /// A scenario or policy description is inconsistent.
    Config(String),
    /// The upper-confidence solver hit its iteration cap.
    NoConvergence {
        kind: DivergenceKind,
        mu_hat: f64,
        level: f64,
    },
    /// A simulation run failed; carries the run identifier.
    Run {
        policy: String,
        replication: u64,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by the input description rather than by a run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::NoConvergence {
                kind,
                mu_hat,
                level,
            } => write!(
                f,
                "{kind:?} upper-confidence solver did not converge (mu_hat = {mu_hat}, level = {level})"
            ),
            Error::Run {
                policy,
                replication,
                source,
            } => write!(f, "run failed (policy {policy}, replication {replication}): {source}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::Run { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
