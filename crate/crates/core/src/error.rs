use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model is invalid ({} violation(s))", .0.len())]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("bound must allow at least one transition per device")]
    BoundTooSmall,
    #[error("global expansion cap of {cap} search nodes reached")]
    CapExceeded { cap: u64 },
    #[error("device index {0} is out of range")]
    NoSuchDevice(usize),
}

/// Errors raised while reading model or control files.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Schema { line: u32, message: String },
    #[error("line {line}: unknown {what} `{name}`")]
    DanglingReference {
        line: u32,
        what: &'static str,
        name: String,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ParseError {
    pub(crate) fn schema(line: u32, message: impl Into<String>) -> Self {
        ParseError::Schema {
            line,
            message: message.into(),
        }
    }
}

/// Errors raised while turning a parsed document into a [`crate::SystemModel`].
#[derive(Debug, Error)]
pub enum LowerError {
    #[error("view `{view}`: event `{event}` has no control group `{group}`")]
    Bind { view: String, event: String, group: String },
    #[error("view `{view}`: control group `{group}` cannot perform `{action}`")]
    Capability {
        view: String,
        group: String,
        action: String,
    },
    #[error("view `{view}`: unknown action `{action}` on event `{event}`")]
    UnknownAction {
        view: String,
        event: String,
        action: String,
    },
    #[error("control group `{group}`: {what} is not supported")]
    NotSupported { group: String, what: String },
    #[error("{0}")]
    Config(String),
    #[error("state `{state}` of `{machine}` returns to both `{first}` and `{second}`")]
    ConflictingReturn {
        machine: String,
        state: String,
        first: String,
        second: String,
    },
    #[error("call event `{event}` has conflicting reuse/autoReturn attributes")]
    ConflictingCallAttributes { event: String },
    #[error("`{machine}` has no initial state to call into")]
    MissingEntry { machine: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("event `{event}` of `{machine}` is not bound to a control")]
    Unbound { machine: String, event: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step {index}: no enabled transition matches {what}")]
    NoMatch { index: usize, what: String },
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("script ends before every device finished")]
    Incomplete,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
