use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::expr::Value;

pub type Record = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    NodeFired {
        node: String,
    },
    /// `variable` is absent for objects that declare no variables.
    ObjectBound {
        object: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        variable: Option<String>,
        value: Value,
    },
    StoreChanged {
        store: String,
        inserted: Record,
    },
    MessageSent {
        flow: String,
    },
    MessageReceived {
        flow: String,
    },
    SubProcessCompleted {
        node: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub step: u64,
    #[serde(flatten)]
    pub event: Event,
}

fn fmt_record(r: &Record) -> String {
    let fields: Vec<String> = r.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", fields.join(", "))
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {:02}: ", self.step)?;
        match &self.event {
            Event::NodeFired { node } => write!(f, "node_fired {node}"),
            Event::ObjectBound {
                object,
                variable: Some(v),
                value,
            } => write!(f, "object_bound {object}.{v} = {value}"),
            Event::ObjectBound {
                object,
                variable: None,
                ..
            } => write!(f, "object_bound {object}"),
            Event::StoreChanged { store, inserted } => {
                write!(f, "store_changed {store} +{}", fmt_record(inserted))
            }
            Event::MessageSent { flow } => write!(f, "message_sent {flow}"),
            Event::MessageReceived { flow } => write!(f, "message_received {flow}"),
            Event::SubProcessCompleted { node } => write!(f, "sub_process_completed {node}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    /// Fired nodes in firing order.
    pub fn fired(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter_map(|e| match &e.event {
                Event::NodeFired { node } => Some(node.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn fire_count(&self, node: &str) -> usize {
        self.fired().iter().filter(|n| **n == node).count()
    }

    pub fn inserts(&self, store: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(&e.event, Event::StoreChanged { store: s, .. } if s == store))
            .count()
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{e}\n")).collect()
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("trace entries serialize") + "\n")
            .collect()
    }
}
