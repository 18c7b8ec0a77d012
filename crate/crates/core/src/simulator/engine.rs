use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::behavior::{Behaviors, StoreAction, TaskBehavior};
use super::trace::{Event, Record, Trace, TraceEntry};
use super::SimError;
use crate::expr::{eval_expr, Env, EvalError, Expr, Value};
use crate::model::*;

pub type ObjectValues = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub flow: String,
    pub objects: BTreeMap<String, ObjectValues>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecutionState {
    /// Token count per sequence flow; flows without tokens are absent.
    pub tokens: BTreeMap<String, u32>,
    /// Object id to its bound variables. An object is bound once present.
    pub bindings: BTreeMap<String, ObjectValues>,
    pub stores: BTreeMap<String, Vec<Record>>,
    /// Pending messages per receiving pool.
    pub inbox: BTreeMap<String, VecDeque<Message>>,
    pub completed: BTreeSet<String>,
    /// Sub-processes whose inner flow is still running.
    pub active: BTreeSet<String>,
    pub step_count: u64,
}

impl ExecutionState {
    pub fn has_tokens(&self) -> bool {
        !self.tokens.is_empty()
    }

    pub fn is_bound(&self, object: &str) -> bool {
        self.bindings.contains_key(object)
    }

    fn add_token(&mut self, flow: &str) {
        *self.tokens.entry(flow.to_string()).or_insert(0) += 1;
    }

    fn take_token(&mut self, flow: &str) -> bool {
        match self.tokens.get_mut(flow) {
            Some(n) if *n > 1 => {
                *n -= 1;
                true
            }
            Some(_) => {
                self.tokens.remove(flow);
                true
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Fire the enabled node with the smallest id.
    SmallestId,
    /// Pick uniformly among enabled nodes with a seeded generator.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Completed,
    Deadlocked,
    StepLimit,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Completed => "completed",
            Status::Deadlocked => "deadlocked",
            Status::StepLimit => "step-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub trace: Trace,
    pub status: Status,
    pub state: ExecutionState,
}

/// Binds `object.variable` paths to the current state, plus a few extra
/// names (`instance.index`, `record.*`).
struct StateEnv<'a> {
    d: &'a Diagram,
    bindings: &'a BTreeMap<String, ObjectValues>,
    extra: Vec<(String, Value)>,
}

impl Env for StateEnv<'_> {
    fn lookup(&self, path: &str) -> Option<Value> {
        if let Some((_, v)) = self.extra.iter().find(|(k, _)| k == path) {
            return Some(v.clone());
        }
        let (object, var) = path.split_once('.')?;
        let values = self.bindings.get(object)?;
        match values.get(var) {
            Some(v) => Some(v.clone()),
            None => self
                .d
                .object(object)
                .and_then(|o| o.variable(var))
                .map(|_| Value::Null),
        }
    }
}

pub struct Simulator<'d> {
    d: &'d Diagram,
    behaviors: &'d Behaviors,
}

impl<'d> Simulator<'d> {
    pub fn new(d: &'d Diagram, behaviors: &'d Behaviors) -> Result<Self, SimError> {
        behaviors.check(d).map_err(SimError::Behavior)?;
        Ok(Simulator { d, behaviors })
    }

    fn behavior(&self, node: &str) -> Option<&'d TaskBehavior> {
        self.behaviors.task(node)
    }

    fn env<'a>(&'a self, state: &'a ExecutionState, extra: Vec<(String, Value)>) -> StateEnv<'a> {
        StateEnv {
            d: self.d,
            bindings: &state.bindings,
            extra,
        }
    }

    fn is_internal_message(&self, m: &MessageFlow) -> bool {
        !self.d.is_external(&m.source)
    }

    fn internal_incoming_messages(&self, node: &str) -> Vec<&'d MessageFlow> {
        self.d
            .incoming_messages(node)
            .into_iter()
            .filter(|m| self.is_internal_message(m))
            .collect()
    }

    /// Objects that enter the diagram from black-box participants.
    fn external_objects(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for m in self.d.message_flows() {
            if self.d.is_external(&m.source) && !self.d.is_external(&m.target) {
                for a in &m.attachments {
                    if a.direction == Direction::Input {
                        out.insert(a.object.clone());
                    }
                }
            }
        }
        for n in self.d.nodes() {
            if n.kind == NodeKind::StartEventMessage
                && self.internal_incoming_messages(&n.id).is_empty()
            {
                for f in self.d.outgoing(&n.id) {
                    for a in &f.attachments {
                        if a.direction == Direction::Output {
                            out.insert(a.object.clone());
                        }
                    }
                }
            }
        }
        out
    }

    /// Fires top-level start events, binds external objects and loads the
    /// initial store contents.
    pub fn init(
        &self,
        inputs: &BTreeMap<String, Value>,
    ) -> Result<(ExecutionState, Trace), SimError> {
        let mut state = ExecutionState::default();
        let mut trace = Trace::default();
        let starts: Vec<&Node> = self
            .d
            .pools()
            .iter()
            .filter(|p| !p.external)
            .flat_map(|p| p.nodes.iter())
            .filter(|n| n.kind.is_start())
            .collect();
        if starts.is_empty() {
            return Err(SimError::NoStartEvent);
        }

        let external = self.external_objects();
        let mut used = HashSet::new();
        for obj_id in &external {
            let obj = self.d.object(obj_id).expect("attached objects exist");
            let mut values = ObjectValues::new();
            for v in &obj.variables {
                let key = format!("{}.{}", obj.id, v.name);
                let value = match inputs.get(&key) {
                    Some(val) => {
                        used.insert(key.clone());
                        check_type(&key, v, val)?;
                        val.clone()
                    }
                    None if v.optional => Value::Null,
                    None => return Err(SimError::MissingInput(key)),
                };
                values.insert(v.name.clone(), value);
            }
            self.bind(&mut state, &mut trace, obj_id, values);
        }
        if let Some(unknown) = inputs.keys().find(|k| !used.contains(*k)) {
            return Err(SimError::UnknownInput(unknown.clone()));
        }

        for r in &self.behaviors.initial_records {
            let record: Record = r
                .fields
                .iter()
                .map(|(f, v)| (format!("{}.{f}", r.entity), v.clone()))
                .collect();
            self.insert(&mut state, &mut trace, &r.store, record);
        }

        for s in starts {
            if s.kind == NodeKind::StartEventMessage
                && !self.internal_incoming_messages(&s.id).is_empty()
            {
                continue;
            }
            state.completed.insert(s.id.clone());
            for f in self.d.outgoing(&s.id) {
                state.add_token(&f.id);
            }
        }
        Ok((state, trace))
    }

    fn bind(
        &self,
        state: &mut ExecutionState,
        trace: &mut Trace,
        object: &str,
        values: ObjectValues,
    ) {
        let step = state.step_count;
        if values.is_empty() {
            trace.entries.push(TraceEntry {
                step,
                event: Event::ObjectBound {
                    object: object.to_string(),
                    variable: None,
                    value: Value::Null,
                },
            });
        }
        for (var, value) in &values {
            trace.entries.push(TraceEntry {
                step,
                event: Event::ObjectBound {
                    object: object.to_string(),
                    variable: Some(var.clone()),
                    value: value.clone(),
                },
            });
        }
        state
            .bindings
            .entry(object.to_string())
            .or_default()
            .extend(values);
    }

    fn bind_nulls(&self, state: &mut ExecutionState, trace: &mut Trace, object: &str) {
        let values = self
            .d
            .object(object)
            .map(|o| {
                o.variables
                    .iter()
                    .map(|v| (v.name.clone(), Value::Null))
                    .collect()
            })
            .unwrap_or_default();
        self.bind(state, trace, object, values);
    }

    fn insert(&self, state: &mut ExecutionState, trace: &mut Trace, store: &str, record: Record) {
        trace.entries.push(TraceEntry {
            step: state.step_count,
            event: Event::StoreChanged {
                store: store.to_string(),
                inserted: record.clone(),
            },
        });
        state
            .stores
            .entry(store.to_string())
            .or_default()
            .push(record);
    }

    fn pending_message(&self, state: &ExecutionState, node: &str) -> Option<(String, usize)> {
        let flows: HashSet<&str> = self
            .internal_incoming_messages(node)
            .into_iter()
            .map(|m| m.id.as_str())
            .collect();
        if flows.is_empty() {
            return None;
        }
        let pool = self.d.pool_of(node)?;
        let queue = state.inbox.get(&pool.id)?;
        queue
            .iter()
            .position(|m| flows.contains(m.flow.as_str()))
            .map(|i| (pool.id.clone(), i))
    }

    fn record_matches(
        &self,
        state: &ExecutionState,
        record: &Record,
        filter: Option<&Expr>,
    ) -> Result<bool, EvalError> {
        let Some(filter) = filter else {
            return Ok(true);
        };
        let mut extra = Vec::new();
        for (k, v) in record {
            extra.push((format!("record.{k}"), v.clone()));
            if let Some((_, field)) = k.split_once('.') {
                extra.push((format!("record.{field}"), v.clone()));
            }
        }
        Ok(matches!(
            eval_expr(filter, &self.env(state, extra))?,
            Value::Bool(true)
        ))
    }

    fn find_record(
        &self,
        state: &ExecutionState,
        store: &str,
        entity: &str,
        filter: Option<&Expr>,
    ) -> Result<Option<Record>, EvalError> {
        let prefix = format!("{entity}.");
        for r in state.stores.get(store).into_iter().flatten() {
            if !r.keys().any(|k| k.starts_with(&prefix)) {
                continue;
            }
            if self.record_matches(state, r, filter)? {
                return Ok(Some(r.clone()));
            }
        }
        Ok(None)
    }

    fn available(
        &self,
        state: &ExecutionState,
        node: &str,
        input: &NodeInput,
        seen: &mut HashSet<String>,
    ) -> bool {
        if state.is_bound(&input.object) {
            return true;
        }
        if let Via::Message(flow) = &input.via {
            if let Some(queue) = self.d.pool_of(node).and_then(|p| state.inbox.get(&p.id)) {
                if queue
                    .iter()
                    .any(|m| &m.flow == flow && m.objects.contains_key(&input.object))
                {
                    return true;
                }
            }
        }
        if let Some(store) = &input.store {
            let reads: Vec<_> = self
                .behavior(node)
                .map(|b| {
                    b.store_actions
                        .iter()
                        .filter_map(|a| match a {
                            StoreAction::Read {
                                store: s,
                                entity,
                                filter,
                                into,
                            } if s == store && *into == input.object => Some((entity, filter)),
                            _ => None,
                        })
                        .collect()
                })
                .unwrap_or_default();
            let satisfied = reads.iter().all(|(entity, filter)| {
                matches!(
                    self.find_record(state, store, entity, filter.as_ref()),
                    Ok(Some(_))
                )
            });
            if satisfied {
                return true;
            }
        }
        if !seen.insert(input.object.clone()) {
            return false;
        }
        for m in self.d.mappings() {
            if m.target_object == input.object {
                // Prefer the node's own channel for the source, which may be
                // a store read.
                let src = self
                    .d
                    .inputs_of(node)
                    .into_iter()
                    .find(|i| i.object == m.source_object)
                    .unwrap_or_else(|| NodeInput {
                        object: m.source_object.clone(),
                        optional: false,
                        via: input.via.clone(),
                        store: None,
                    });
                if self.available(state, node, &src, seen) {
                    return true;
                }
            }
        }
        false
    }

    fn tokens_ready(&self, state: &ExecutionState, node: &Node) -> bool {
        let incoming = self.d.incoming(&node.id);
        let messages = self.internal_incoming_messages(&node.id);
        let control = match node.kind {
            NodeKind::GatewayExclusiveData | NodeKind::EndEvent => {
                incoming.iter().any(|f| state.tokens.contains_key(&f.id))
            }
            _ if incoming.is_empty() => !messages.is_empty(),
            _ => incoming.iter().all(|f| state.tokens.contains_key(&f.id)),
        };
        if !control {
            return false;
        }
        messages.is_empty() || self.pending_message(state, &node.id).is_some()
    }

    pub fn is_enabled(&self, state: &ExecutionState, node: &str) -> bool {
        let Some(n) = self.d.node(node) else {
            return false;
        };
        if n.kind.is_start() && self.internal_incoming_messages(node).is_empty() {
            return false;
        }
        if !self.tokens_ready(state, n) {
            return false;
        }
        self.d
            .inputs_of(node)
            .iter()
            .filter(|i| !i.optional)
            .all(|i| self.available(state, node, i, &mut HashSet::new()))
    }

    pub fn enabled(&self, state: &ExecutionState) -> BTreeSet<String> {
        self.d
            .node_ids()
            .iter()
            .filter(|n| self.is_enabled(state, n))
            .cloned()
            .collect()
    }

    fn eval(
        &self,
        state: &ExecutionState,
        node: &str,
        e: &Expr,
        extra: Vec<(String, Value)>,
    ) -> Result<Value, SimError> {
        eval_expr(e, &self.env(state, extra)).map_err(|error| SimError::Eval {
            node: node.to_string(),
            error,
        })
    }

    fn apply_mapping(
        &self,
        state: &mut ExecutionState,
        trace: &mut Trace,
        node: &str,
        m: &DataMapping,
    ) -> Result<(), SimError> {
        let mut values = ObjectValues::new();
        for r in &m.rules {
            let v = self.eval(state, node, &r.from, Vec::new())?;
            let var = r.to.split_once('.').map_or(r.to.as_str(), |(_, v)| v);
            values.insert(var.to_string(), v);
        }
        self.bind(state, trace, &m.target_object, values);
        Ok(())
    }

    /// Fires one enabled node and returns the trace it produced.
    pub fn fire(&self, state: &mut ExecutionState, node: &str) -> Result<Trace, SimError> {
        if !self.is_enabled(state, node) {
            return Err(SimError::NotEnabled(node.to_string()));
        }
        let n = self.d.node(node).expect("enabled nodes exist");
        state.step_count += 1;
        let step = state.step_count;
        let mut trace = Trace::default();

        let incoming = self.d.incoming(node);
        match n.kind {
            NodeKind::GatewayExclusiveData | NodeKind::EndEvent => {
                if let Some(f) = incoming.iter().find(|f| state.tokens.contains_key(&f.id)) {
                    state.take_token(&f.id);
                }
            }
            _ => {
                for f in &incoming {
                    state.take_token(&f.id);
                }
            }
        }

        if let Some((pool, i)) = self.pending_message(state, node) {
            let msg = state
                .inbox
                .get_mut(&pool)
                .and_then(|q| q.remove(i))
                .expect("pending message exists");
            trace.entries.push(TraceEntry {
                step,
                event: Event::MessageReceived {
                    flow: msg.flow.clone(),
                },
            });
            for (obj, values) in msg.objects {
                self.bind(state, &mut trace, &obj, values);
            }
        }

        let inputs = self.d.inputs_of(node);
        let behavior = self.behavior(node);
        for a in behavior
            .map(|b| b.store_actions.as_slice())
            .unwrap_or_default()
        {
            if let StoreAction::Read {
                store,
                entity,
                filter,
                into,
            } = a
            {
                let found = self
                    .find_record(state, store, entity, filter.as_ref())
                    .map_err(|error| SimError::Eval {
                        node: node.to_string(),
                        error,
                    })?;
                if let Some(record) = found {
                    let obj = self.d.object(into).expect("checked behaviors");
                    let mut values = ObjectValues::new();
                    for v in &obj.variables {
                        let hit = record
                            .get(&v.name)
                            .or_else(|| record.get(&format!("{entity}.{}", v.name)));
                        if let Some(val) = hit {
                            values.insert(v.name.clone(), val.clone());
                        }
                    }
                    self.bind(state, &mut trace, into, values);
                }
            }
        }
        for i in &inputs {
            if i.store.is_some() && !state.is_bound(&i.object) {
                let has_read = behavior.is_some_and(|b| {
                    b.store_actions.iter().any(|a| {
                        matches!(a, StoreAction::Read { into, store, .. }
                            if *into == i.object && Some(store) == i.store.as_ref())
                    })
                });
                if !has_read {
                    self.bind_nulls(state, &mut trace, &i.object);
                }
            }
        }

        // Mappings feeding this node's inputs, including chains of
        // mappings whose source is itself a mapping target.
        let mut relevant: BTreeSet<&str> = inputs.iter().map(|i| i.object.as_str()).collect();
        loop {
            let before = relevant.len();
            for m in self.d.mappings() {
                if relevant.contains(m.target_object.as_str()) {
                    relevant.insert(m.source_object.as_str());
                }
            }
            if relevant.len() == before {
                break;
            }
        }
        let mut pending: Vec<&DataMapping> = self
            .d
            .mappings()
            .iter()
            .filter(|m| relevant.contains(m.target_object.as_str()))
            .collect();
        pending.sort_by(|a, b| a.id.cmp(&b.id));
        while let Some(i) = pending
            .iter()
            .position(|m| state.is_bound(&m.source_object))
        {
            let m = pending.remove(i);
            self.apply_mapping(state, &mut trace, node, m)?;
        }

        for i in &inputs {
            if i.optional && !state.is_bound(&i.object) {
                self.bind_nulls(state, &mut trace, &i.object);
            }
        }

        trace.entries.push(TraceEntry {
            step,
            event: Event::NodeFired {
                node: node.to_string(),
            },
        });
        state.completed.insert(node.to_string());

        if let Some(b) = behavior {
            let instances = if n.multi_instance {
                b.instances.unwrap_or(1)
            } else {
                1
            };
            for index in 0..instances {
                let extra = vec![("instance.index".to_string(), Value::Num(index as f64))];
                for e in &b.effects {
                    let v = self.eval(state, node, &e.value, extra.clone())?;
                    let (obj, var) = e.target.split_once('.').expect("checked behaviors");
                    self.bind(
                        state,
                        &mut trace,
                        obj,
                        ObjectValues::from([(var.to_string(), v)]),
                    );
                }
                for a in &b.store_actions {
                    if let StoreAction::Insert {
                        store,
                        entity,
                        fields,
                    } = a
                    {
                        let mut record = Record::new();
                        for (f, e) in fields {
                            let v = self.eval(state, node, e, extra.clone())?;
                            record.insert(format!("{entity}.{f}"), v);
                        }
                        self.insert(state, &mut trace, store, record);
                    }
                }
            }
        }

        if n.kind == NodeKind::SubProcess {
            state.active.insert(node.to_string());
            for c in n.children.iter().filter(|c| c.kind.is_start()) {
                state.completed.insert(c.id.clone());
                for f in self.d.outgoing(&c.id) {
                    state.add_token(&f.id);
                }
            }
        } else {
            self.finish(state, &mut trace, n)?;
        }

        if n.kind == NodeKind::EndEvent {
            if let Some(parent) = self.d.parent_of(node) {
                if self.block_quiet(state, parent) {
                    let p = self.d.node(parent).expect("parents exist");
                    state.active.remove(parent);
                    trace.entries.push(TraceEntry {
                        step,
                        event: Event::SubProcessCompleted {
                            node: parent.to_string(),
                        },
                    });
                    self.finish(state, &mut trace, p)?;
                }
            }
        }
        Ok(trace)
    }

    /// True when nothing is left running inside a sub-process.
    fn block_quiet(&self, state: &ExecutionState, sp: &str) -> bool {
        let inner: HashSet<&str> = self.d.descendants(sp).into_iter().collect();
        let tokens_left = state.tokens.keys().any(|f| {
            self.d
                .sequence_flow(f)
                .is_some_and(|sf| inner.contains(sf.source.as_str()))
        });
        let nested_active = state.active.iter().any(|a| inner.contains(a.as_str()));
        !tokens_left && !nested_active
    }

    /// Output binding, branch choice, outgoing tokens and message sends.
    fn finish(
        &self,
        state: &mut ExecutionState,
        trace: &mut Trace,
        n: &Node,
    ) -> Result<(), SimError> {
        for o in self.d.outputs_of(&n.id) {
            if !state.is_bound(&o.object) {
                self.bind_nulls(state, trace, &o.object);
            }
        }

        let outgoing = self.d.outgoing(&n.id);
        let chosen: Vec<&SequenceFlow> = if n.kind == NodeKind::GatewayExclusiveData {
            let mut pick = None;
            for f in &outgoing {
                if let Some(g) = &f.guard {
                    if self.eval(state, &n.id, g, Vec::new())? == Value::Bool(true) {
                        pick = Some(*f);
                        break;
                    }
                }
            }
            let pick = pick
                .or_else(|| outgoing.iter().find(|f| f.guard.is_none()).copied())
                .ok_or_else(|| SimError::StuckGateway(n.id.clone()))?;
            vec![pick]
        } else {
            outgoing
        };
        for f in chosen {
            state.add_token(&f.id);
        }

        for m in self.d.outgoing_messages(&n.id) {
            let mut objects = BTreeMap::new();
            for a in m
                .attachments
                .iter()
                .filter(|a| a.direction == Direction::Output)
            {
                let values = state.bindings.get(&a.object).cloned().unwrap_or_default();
                objects.insert(a.object.clone(), values);
            }
            trace.entries.push(TraceEntry {
                step: state.step_count,
                event: Event::MessageSent { flow: m.id.clone() },
            });
            if self.d.is_external(&m.target) {
                continue;
            }
            if let Some(pool) = self.d.pool_of(&m.target) {
                state
                    .inbox
                    .entry(pool.id.clone())
                    .or_default()
                    .push_back(Message {
                        flow: m.id.clone(),
                        objects,
                    });
            }
        }
        Ok(())
    }

    fn status(&self, state: &ExecutionState) -> Status {
        if !state.has_tokens() && state.active.is_empty() {
            Status::Completed
        } else {
            Status::Deadlocked
        }
    }

    pub fn run(
        &self,
        inputs: &BTreeMap<String, Value>,
        max_steps: u64,
        policy: Policy,
    ) -> Result<Run, SimError> {
        let (mut state, mut trace) = self.init(inputs)?;
        let mut rng = match policy {
            Policy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            Policy::SmallestId => None,
        };
        loop {
            let enabled = self.enabled(&state);
            if enabled.is_empty() {
                let status = self.status(&state);
                return Ok(Run {
                    trace,
                    status,
                    state,
                });
            }
            if state.step_count >= max_steps {
                return Ok(Run {
                    trace,
                    status: Status::StepLimit,
                    state,
                });
            }
            let pick = match rng.as_mut() {
                Some(rng) => enabled.iter().choose(rng).expect("non-empty"),
                None => enabled.iter().next().expect("non-empty"),
            }
            .clone();
            let delta = self.fire(&mut state, &pick)?;
            trace.entries.extend(delta.entries);
        }
    }
}

fn check_type(key: &str, var: &Variable, value: &Value) -> Result<(), SimError> {
    let ok = match (var.vtype, value) {
        (_, Value::Null) => var.optional,
        (VarType::String, Value::Str(_)) => true,
        (VarType::Number, Value::Num(_)) => true,
        (VarType::Boolean, Value::Bool(_)) => true,
        (VarType::Record, _) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(SimError::InputType {
            path: key.to_string(),
            expected: var.vtype.as_str(),
            found: value.type_name(),
        })
    }
}
