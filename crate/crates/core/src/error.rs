use std::fmt;

use thiserror::Error;

/// Runtime faults raised while executing a model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("event scheduled at t={at} but clock is already at t={clock}")]
    PastTime { at: f64, clock: f64 },
    #[error("unknown state variable `{0}`")]
    UnknownState(String),
    #[error("unknown valve `{0}`")]
    UnknownValve(String),
    #[error("run exceeded the event ceiling of {ceiling} events (clock t={clock})")]
    NonTermination { ceiling: u64, clock: f64 },
    #[error("element `{element}` sampled negative duration {value}")]
    NegativeDuration { element: String, value: f64 },
    #[error("element `{element}` requests {requested} of `{resource}` which has only {total} servers")]
    UnsatisfiableRequest {
        element: String,
        resource: String,
        requested: u32,
        total: u32,
    },
    #[error("entity {entity} releases {requested} of `{resource}` at `{element}` but holds {held}")]
    ReleaseWithoutHold {
        element: String,
        entity: u64,
        resource: String,
        requested: u32,
        held: u32,
    },
    #[error("resource `{0}` is already fully preempted")]
    AlreadyFullyPreempted(String),
    #[error("element `{element}` cannot unbatch entity {entity}: it carries no contents")]
    UnbatchOfPlainEntity { element: String, entity: u64 },
    #[error("element `{element}`: {message}")]
    PredicateEval { element: String, message: String },
    #[error("deadlock at t={time}: {}", WaitGraph(.waits))]
    Deadlock { time: f64, waits: Vec<WaitEdge> },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Distribution(#[from] DistError),
}

/// One edge of a deadlock wait graph: `entity` waits at `element` for
/// `resource`, currently held by `holders`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WaitEdge {
    pub entity: u64,
    pub element: String,
    pub resource: String,
    pub holders: Vec<u64>,
}

struct WaitGraph<'a>(&'a [WaitEdge]);

impl fmt::Display for WaitGraph<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("entities blocked with no pending events");
        }
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(
                f,
                "entity {} at `{}` waits for `{}` held by {:?}",
                w.entity, w.element, w.resource, w.holders
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),
}

/// A syntax error with 1-based position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: error: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }
}

/// Parse failure: every syntax error found, in source order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} syntax error(s); first: {}", .0.len(), .0.first().map(|e| e.to_string()).unwrap_or_default())]
pub struct ParseErrors(pub Vec<SyntaxError>);

/// Errors surfaced by scenario evaluation (replicate / sweep / calibrate /
/// crash search).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("replication {replication}: {source}")]
    Replication { replication: usize, source: SimError },
    #[error("model does not validate: {0}")]
    Invalid(String),
    #[error("scenario `{scenario}`: {message}")]
    Scenario { scenario: String, message: String },
    #[error("disruption `{submodel}`: {message}")]
    Disruption { submodel: String, message: String },
    #[error("calibration failed: {}", calibration_summary(.report))]
    CalibrationFailed {
        report: Box<crate::disruptions::CalibrationReport>,
    },
    #[error("crash search: {0}")]
    Crash(String),
}

fn calibration_summary(r: &crate::disruptions::CalibrationReport) -> String {
    r.entries
        .iter()
        .filter(|e| e.residual.abs() > r.tolerance)
        .map(|e| {
            format!(
                "{} residual {:+.3} days (best value {})",
                e.parameter, e.residual, e.value
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}
