//! Token-and-data execution of diagrams.
//!
//! A node is enabled when its control-flow join condition holds and every
//! non-optional input object is available: already bound, waiting in the
//! pool's inbox, readable from a store, or derivable through a data
//! mapping. One node fires per step, chosen by a [`Policy`].

pub mod behavior;
mod engine;
pub mod trace;

use std::collections::BTreeMap;

pub use behavior::Behaviors;
pub use engine::{ExecutionState, Message, ObjectValues, Policy, Run, Simulator, Status};
pub use trace::{Event, Record, Trace, TraceEntry};

use crate::expr::{EvalError, Value};
use crate::model::Diagram;

pub const DEFAULT_MAX_STEPS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("diagram has no start event")]
    NoStartEvent,
    #[error("missing start input `{0}`")]
    MissingInput(String),
    #[error("start input `{0}` does not name a variable of an incoming object")]
    UnknownInput(String),
    #[error("start input `{path}` expects a {expected}, found {found}")]
    InputType {
        path: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid behaviors: {0}")]
    Behavior(String),
    #[error("{node}: {error}")]
    Eval { node: String, error: EvalError },
    #[error("gateway `{0}` has no true guard and no default flow")]
    StuckGateway(String),
    #[error("node `{0}` is not enabled")]
    NotEnabled(String),
}

/// Runs a diagram to completion, deadlock or the step limit.
pub fn run(
    d: &Diagram,
    behaviors: &Behaviors,
    inputs: &BTreeMap<String, Value>,
    max_steps: u64,
    policy: Policy,
) -> Result<Run, SimError> {
    Simulator::new(d, behaviors)?.run(inputs, max_steps, policy)
}
