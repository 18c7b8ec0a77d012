//! Scripted task internals used by the simulator.
//!
//! Tasks are opaque in the notation itself, so a run needs a description
//! of what each task writes to its outputs and stores. Behaviors live in
//! the `behaviors` section of a document or in a sidecar file.

use std::collections::HashSet;

use crate::expr::{Expr, Value};
use crate::model::{Diagram, NodeKind};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Behaviors {
    pub tasks: Vec<TaskBehavior>,
    pub initial_records: Vec<InitialRecord>,
    /// The first scenario is the default one.
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskBehavior {
    pub task: String,
    /// Instance count for multi-instance tasks.
    pub instances: Option<u32>,
    pub effects: Vec<Effect>,
    pub store_actions: Vec<StoreAction>,
}

impl TaskBehavior {
    pub fn new(task: impl Into<String>) -> Self {
        TaskBehavior {
            task: task.into(),
            instances: None,
            effects: Vec::new(),
            store_actions: Vec::new(),
        }
    }
}

/// `target := value`, target being `object.variable`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub target: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoreAction {
    Insert {
        store: String,
        entity: String,
        fields: Vec<(String, Expr)>,
    },
    /// Copies the first record of `entity` matching `filter` into the
    /// object `into`. Inside the filter, `record.<field>` names the
    /// candidate record's fields.
    Read {
        store: String,
        entity: String,
        filter: Option<Expr>,
        into: String,
    },
}

impl StoreAction {
    pub fn store(&self) -> &str {
        match self {
            StoreAction::Insert { store, .. } | StoreAction::Read { store, .. } => store,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialRecord {
    pub store: String,
    pub entity: String,
    pub fields: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// `object.variable` to value.
    pub inputs: Vec<(String, Value)>,
}

impl Behaviors {
    pub fn task(&self, id: &str) -> Option<&TaskBehavior> {
        self.tasks.iter().find(|t| t.task == id)
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// Cross-checks the behaviors against a diagram.
    pub fn check(&self, d: &Diagram) -> Result<(), String> {
        let mut seen = HashSet::new();
        for t in &self.tasks {
            if !seen.insert(t.task.as_str()) {
                return Err(format!("duplicate behavior for `{}`", t.task));
            }
            let node = d
                .node(&t.task)
                .ok_or_else(|| format!("behavior for unknown node `{}`", t.task))?;
            if !matches!(node.kind, NodeKind::Task | NodeKind::SubProcess) {
                return Err(format!("`{}` is a {}, not an activity", t.task, node.kind));
            }
            let outputs: HashSet<String> = d
                .outputs_of(&t.task)
                .into_iter()
                .map(|o| o.object)
                .collect();
            for e in &t.effects {
                let (object, var) = e.target.split_once('.').ok_or_else(|| {
                    format!(
                        "{}: effect target `{}` is not object.variable",
                        t.task, e.target
                    )
                })?;
                if !outputs.contains(object) {
                    return Err(format!(
                        "{}: effect target `{}` is not an output of the task",
                        t.task, e.target
                    ));
                }
                if d.object(object).and_then(|o| o.variable(var)).is_none() {
                    return Err(format!("{}: unknown variable `{}`", t.task, e.target));
                }
            }
            for a in &t.store_actions {
                let store = d
                    .store(a.store())
                    .ok_or_else(|| format!("{}: unknown store `{}`", t.task, a.store()))?;
                match a {
                    StoreAction::Insert { entity, fields, .. } => {
                        let ent = store.entity(entity).ok_or_else(|| {
                            format!("{}: unknown entity `{}.{entity}`", t.task, store.id)
                        })?;
                        for (f, _) in fields {
                            if ent.field(f).is_none() {
                                return Err(format!(
                                    "{}: unknown field `{}.{entity}.{f}`",
                                    t.task, store.id
                                ));
                            }
                        }
                    }
                    StoreAction::Read { entity, into, .. } => {
                        if store.entity(entity).is_none() {
                            return Err(format!(
                                "{}: unknown entity `{}.{entity}`",
                                t.task, store.id
                            ));
                        }
                        if d.object(into).is_none() {
                            return Err(format!("{}: unknown object `{into}`", t.task));
                        }
                    }
                }
            }
        }
        for r in &self.initial_records {
            let store = d
                .store(&r.store)
                .ok_or_else(|| format!("initial record for unknown store `{}`", r.store))?;
            let ent = store
                .entity(&r.entity)
                .ok_or_else(|| format!("unknown entity `{}.{}`", r.store, r.entity))?;
            for (f, _) in &r.fields {
                if ent.field(f).is_none() {
                    return Err(format!("unknown field `{}.{}.{f}`", r.store, r.entity));
                }
            }
        }
        let mut names = HashSet::new();
        for s in &self.scenarios {
            if !names.insert(s.name.as_str()) {
                return Err(format!("duplicate scenario `{}`", s.name));
            }
        }
        Ok(())
    }
}
