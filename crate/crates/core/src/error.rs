use thiserror::Error;

use crate::trade::FeedbackKind;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value or structure failed its invariant checks.
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    /// A constructor or algorithm parameter is outside its domain.
    #[error("parameter `{name}` out of range: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The learner and the environment disagree on the feedback model.
    #[error("feedback contract violated: learner requires {required:?} feedback, {context}")]
    Contract {
        required: FeedbackKind,
        context: String,
    },

    /// An operation needs a non-empty trajectory.
    #[error("trajectory is empty")]
    EmptyTrajectory,

    /// Pseudo-regret is only defined against an iid law.
    #[error("pseudo-regret requires an iid environment")]
    NotIid,

    /// The adversary's price probe could not produce an estimate.
    #[error("price probe failed: {0}")]
    Probe(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }

    /// True for feedback-contract violations (the CLI maps these to a
    /// distinct exit code).
    pub fn is_contract(&self) -> bool {
        matches!(self, Error::Contract { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
