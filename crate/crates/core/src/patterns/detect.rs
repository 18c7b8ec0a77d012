//! One structural predicate per supported pattern row.

use std::collections::{BTreeMap, BTreeSet};

use super::{Instance, PatternId};
use crate::model::*;

fn inst<I: IntoIterator<Item = S>, S: AsRef<str>>(ids: I) -> Instance {
    ids.into_iter().map(|s| s.as_ref().to_string()).collect()
}

struct Facts<'d> {
    d: &'d Diagram,
    accesses: Vec<StoreAccess>,
}

impl<'d> Facts<'d> {
    fn new(d: &'d Diagram) -> Self {
        Facts {
            d,
            accesses: d.store_accesses(),
        }
    }

    fn kind(&self, node: &str) -> Option<NodeKind> {
        self.d.node(node).map(|n| n.kind)
    }

    fn is_task(&self, node: &str) -> bool {
        self.kind(node) == Some(NodeKind::Task)
    }

    fn tasks(&self) -> impl Iterator<Item = &'d Node> {
        self.d.nodes().filter(|n| n.kind == NodeKind::Task)
    }

    fn diagram_scoped(&self, store: &str) -> bool {
        self.d
            .store(store)
            .is_some_and(|s| s.scope == StoreScope::Diagram)
    }

    fn accesses_of<'a>(&'a self, store: &'a str) -> impl Iterator<Item = &'a StoreAccess> + 'a {
        self.accesses.iter().filter(move |a| a.store == store)
    }

    fn writers<'a>(&'a self, store: &'a str) -> BTreeSet<&'a str> {
        self.accesses_of(store)
            .filter(|a| a.kind == AccessKind::Write)
            .map(|a| a.node.as_str())
            .collect()
    }

    fn readers<'a>(&'a self, store: &'a str) -> BTreeSet<&'a str> {
        self.accesses_of(store)
            .filter(|a| a.kind == AccessKind::Read)
            .map(|a| a.node.as_str())
            .collect()
    }

    /// Message flows between a node and a black-box pool.
    fn external_out(&self, node: &str) -> Vec<&'d MessageFlow> {
        self.d
            .outgoing_messages(node)
            .into_iter()
            .filter(|m| self.d.is_external(&m.target))
            .collect()
    }

    fn external_in(&self, node: &str) -> Vec<&'d MessageFlow> {
        self.d
            .incoming_messages(node)
            .into_iter()
            .filter(|m| self.d.is_external(&m.source))
            .collect()
    }

    fn ext_pool(&self, endpoint: &str) -> Option<&'d str> {
        self.d.pool_of(endpoint).map(|p| p.id.as_str())
    }
}

pub(super) fn detect(d: &Diagram, p: PatternId) -> Vec<Instance> {
    let f = Facts::new(d);
    match p {
        PatternId::Wdp(n) => wdp(&f, n),
        // Stores with entity structure, or objects with record or
        // qualified variables.
        PatternId::Structure => {
            let mut out: Vec<Instance> = d
                .stores()
                .iter()
                .filter(|s| s.entities.iter().any(|e| !e.fields.is_empty()))
                .map(|s| inst([&s.id]))
                .collect();
            out.extend(
                d.objects()
                    .iter()
                    .filter(|o| {
                        o.variables
                            .iter()
                            .any(|v| v.vtype == VarType::Record || v.name.contains('.'))
                    })
                    .map(|o| inst([&o.id])),
            );
            out
        }
        // Sequence flows carrying an object.
        PatternId::DataControlFlow => d
            .sequence_flows()
            .flat_map(|sf| {
                sf.attachments
                    .iter()
                    .map(move |a| inst([&sf.id, &a.object]))
            })
            .collect(),
        // Every dashed data connector.
        PatternId::ExplicitDataFlow => d
            .data_flows()
            .map(|df| inst([&df.id, &df.object]))
            .collect(),
        // Any store a node reads or writes.
        PatternId::ProcessDataStore => f
            .accesses
            .iter()
            .map(|a| inst([&a.store, &a.node]))
            .collect(),
    }
}

fn wdp(f: &Facts<'_>, n: u8) -> Vec<Instance> {
    let d = f.d;
    let mut out = Vec::new();
    match n {
        // 1: a task consumes an object with variables.
        1 => {
            for t in f.tasks() {
                for i in d.inputs_of(&t.id) {
                    if d.object(&i.object).is_some_and(|o| !o.variables.is_empty()) {
                        out.push(inst([&t.id, &i.object]));
                    }
                }
            }
        }
        // 2: a store scoped to a sub-process.
        2 => {
            for s in d.stores() {
                if let StoreScope::SubProcess(sp) = &s.scope {
                    out.push(inst([&s.id, sp]));
                }
            }
        }
        // 4: a multi-instance task reads or writes a store.
        4 => {
            for a in &f.accesses {
                if d.node(&a.node).is_some_and(|n| n.multi_instance) {
                    out.push(inst([&a.node, &a.store]));
                }
            }
        }
        // 5: a diagram-scoped store accessed by some node.
        5 => {
            for s in d.stores().iter().filter(|s| f.diagram_scoped(&s.id)) {
                let nodes: Vec<&str> = f.accesses_of(&s.id).map(|a| a.node.as_str()).collect();
                if !nodes.is_empty() {
                    out.push(inst(std::iter::once(s.id.as_str()).chain(nodes)));
                }
            }
        }
        // 7: a diagram-scoped store receives insertions.
        7 => {
            for s in d.stores().iter().filter(|s| f.diagram_scoped(&s.id)) {
                for w in f.writers(&s.id) {
                    out.push(inst([s.id.as_str(), w]));
                }
            }
        }
        // 8: a diagram-scoped store is read but never written in the
        // diagram, so its content comes from the environment.
        8 | 24 => {
            for s in d.stores().iter().filter(|s| f.diagram_scoped(&s.id)) {
                if f.writers(&s.id).is_empty() {
                    for r in f.readers(&s.id) {
                        out.push(inst([s.id.as_str(), r]));
                    }
                }
            }
        }
        // 9: an object produced by one task is consumed by another.
        9 => {
            for o in d.objects() {
                let producers: BTreeSet<String> = d
                    .object_sources(&o.id)
                    .unwrap_or_default()
                    .into_iter()
                    .filter_map(|s| match s {
                        ObjectSource::ActivityOutput { node, .. }
                        | ObjectSource::DataFlowOutput { node, .. } => Some(node),
                        _ => None,
                    })
                    .filter(|n| f.is_task(n))
                    .collect();
                let consumers: BTreeSet<String> = d
                    .object_targets(&o.id)
                    .unwrap_or_default()
                    .into_iter()
                    .filter_map(|t| match t {
                        ObjectTarget::ActivityInput { node, .. }
                        | ObjectTarget::DataFlowInput { node, .. } => Some(node),
                        _ => None,
                    })
                    .filter(|n| f.is_task(n))
                    .collect();
                for p in &producers {
                    for c in consumers.iter().filter(|c| *c != p) {
                        out.push(inst([&o.id, p, c]));
                    }
                }
            }
        }
        // 10: a sub-process takes an object in.
        10 => {
            for sp in d.nodes().filter(|n| n.kind == NodeKind::SubProcess) {
                for i in d.inputs_of(&sp.id) {
                    out.push(inst([&sp.id, &i.object]));
                }
            }
        }
        // 11: a sub-process hands an object out.
        11 => {
            for sp in d.nodes().filter(|n| n.kind == NodeKind::SubProcess) {
                for o in d.outputs_of(&sp.id) {
                    out.push(inst([&sp.id, &o.object]));
                }
            }
        }
        // 12: a multi-instance task has an input object.
        12 => {
            for t in f.tasks().filter(|t| t.multi_instance) {
                for i in d.inputs_of(&t.id) {
                    out.push(inst([&t.id, &i.object]));
                }
            }
        }
        // 13: a multi-instance task has an output object.
        13 => {
            for t in f.tasks().filter(|t| t.multi_instance) {
                for o in d.outputs_of(&t.id) {
                    out.push(inst([&t.id, &o.object]));
                }
            }
        }
        // 14: a diagram-scoped store written by one node and read by
        // another, carrying data across cases.
        14 => {
            for s in d.stores().iter().filter(|s| f.diagram_scoped(&s.id)) {
                for w in f.writers(&s.id) {
                    for r in f.readers(&s.id).into_iter().filter(|r| *r != w) {
                        out.push(inst([s.id.as_str(), w, r]));
                    }
                }
            }
        }
        // 15: a task sends an object to a black-box pool it does not hear
        // back from.
        15 => {
            for t in f.tasks() {
                let back: BTreeSet<_> = f
                    .external_in(&t.id)
                    .iter()
                    .filter_map(|m| f.ext_pool(&m.source))
                    .collect();
                for m in f.external_out(&t.id) {
                    if !m.attachments.is_empty()
                        && !f.ext_pool(&m.target).is_some_and(|p| back.contains(p))
                    {
                        out.push(inst([&t.id, &m.id]));
                    }
                }
            }
        }
        // 16: a task sends a bare request to a black-box pool and gets an
        // object back. 18: the reverse, a bare request in and an object out.
        16 | 18 => {
            for t in f.tasks() {
                for o in f.external_out(&t.id) {
                    for i in f.external_in(&t.id) {
                        if f.ext_pool(&o.target) != f.ext_pool(&i.source) {
                            continue;
                        }
                        let (bare, loaded) = if n == 16 { (o, i) } else { (i, o) };
                        if bare.attachments.is_empty() && !loaded.attachments.is_empty() {
                            out.push(inst([&t.id, &o.id, &i.id]));
                        }
                    }
                }
            }
        }
        // 17: a task or intermediate event receives an object from a
        // black-box pool it does not answer.
        17 => {
            for node in d
                .nodes()
                .filter(|n| matches!(n.kind, NodeKind::Task | NodeKind::IntermediateMessage))
            {
                let answered: BTreeSet<_> = f
                    .external_out(&node.id)
                    .iter()
                    .filter_map(|m| f.ext_pool(&m.target))
                    .collect();
                for m in f.external_in(&node.id) {
                    if !m.attachments.is_empty()
                        && !f.ext_pool(&m.source).is_some_and(|p| answered.contains(p))
                    {
                        out.push(inst([&node.id, &m.id]));
                    }
                }
            }
        }
        // 19: a node writes to a diagram-scoped store.
        19 => {
            for a in f
                .accesses
                .iter()
                .filter(|a| a.kind == AccessKind::Write && f.diagram_scoped(&a.store))
            {
                out.push(inst([&a.node, &a.store]));
            }
        }
        // 20: a node reads from a diagram-scoped store.
        20 => {
            for a in f
                .accesses
                .iter()
                .filter(|a| a.kind == AccessKind::Read && f.diagram_scoped(&a.store))
            {
                out.push(inst([&a.node, &a.store]));
            }
        }
        // 21: a start event receives an object from a black-box pool.
        21 => {
            for s in d.nodes().filter(|n| n.kind.is_start()) {
                for m in f.external_in(&s.id) {
                    if !m.attachments.is_empty() {
                        out.push(inst([&s.id, &m.id]));
                    }
                }
            }
        }
        // 22: an end event sends an object to a black-box pool.
        22 => {
            for e in d.nodes().filter(|n| n.kind == NodeKind::EndEvent) {
                for m in f.external_out(&e.id) {
                    if !m.attachments.is_empty() {
                        out.push(inst([&e.id, &m.id]));
                    }
                }
            }
        }
        // 23: a diagram-scoped store is written but never read inside the
        // diagram, publishing data to the environment.
        23 => {
            for s in d.stores().iter().filter(|s| f.diagram_scoped(&s.id)) {
                if f.readers(&s.id).is_empty() {
                    for w in f.writers(&s.id) {
                        out.push(inst([s.id.as_str(), w]));
                    }
                }
            }
        }
        // 25: an object received from a black-box pool is inserted into a
        // diagram-scoped store.
        25 => {
            for o in d.objects() {
                let from_env: Vec<String> = d
                    .object_sources(&o.id)
                    .unwrap_or_default()
                    .into_iter()
                    .filter_map(|s| match s {
                        ObjectSource::MessageStart { flow, .. }
                        | ObjectSource::MessageReceipt { flow, .. } => d
                            .message_flow(&flow)
                            .filter(|m| d.is_external(&m.source))
                            .map(|m| m.id.clone()),
                        _ => None,
                    })
                    .collect();
                for t in d.object_targets(&o.id).unwrap_or_default() {
                    if let ObjectTarget::StoreInsertion { store, .. } = t {
                        if f.diagram_scoped(&store) {
                            for m in &from_env {
                                out.push(inst([&o.id, m, &store]));
                            }
                        }
                    }
                }
            }
        }
        // 26: an object extracted from a diagram-scoped store is sent to a
        // black-box pool.
        26 => {
            for o in d.objects() {
                let stores: Vec<String> = d
                    .object_sources(&o.id)
                    .unwrap_or_default()
                    .into_iter()
                    .filter_map(|s| match s {
                        ObjectSource::StoreExtraction { store, .. } if f.diagram_scoped(&store) => {
                            Some(store)
                        }
                        _ => None,
                    })
                    .collect();
                for t in d.object_targets(&o.id).unwrap_or_default() {
                    if let ObjectTarget::MessageSend { flow, .. } = t {
                        if d.message_flow(&flow)
                            .is_some_and(|m| d.is_external(&m.target))
                        {
                            for s in &stores {
                                out.push(inst([&o.id, s, &flow]));
                            }
                        }
                    }
                }
            }
        }
        // 27: a node receives an object by value on a sequence or message
        // flow.
        27 => {
            for node in d.nodes() {
                for i in d.inputs_of(&node.id) {
                    if matches!(i.via, Via::Sequence(_) | Via::Message(_)) {
                        out.push(inst([&node.id, &i.object]));
                    }
                }
            }
        }
        // 28: a node emits an object by value on a sequence or message
        // flow.
        28 => {
            for node in d.nodes() {
                for o in d.outputs_of(&node.id) {
                    if matches!(o.via, Via::Sequence(_) | Via::Message(_)) {
                        out.push(inst([&node.id, &o.object]));
                    }
                }
            }
        }
        // 29: a node reads from a store and writes back to the same store.
        29 => {
            let mut by_node: BTreeMap<(&str, &str), (bool, bool)> = BTreeMap::new();
            for a in &f.accesses {
                let e = by_node
                    .entry((a.node.as_str(), a.store.as_str()))
                    .or_default();
                match a.kind {
                    AccessKind::Read => e.0 = true,
                    AccessKind::Write => e.1 = true,
                }
            }
            for ((node, store), (r, w)) in by_node {
                if r && w {
                    out.push(inst([node, store]));
                }
            }
        }
        // 30: several nodes share one store with at least one writer.
        30 => {
            for s in d.stores() {
                let nodes: BTreeSet<&str> = f.accesses_of(&s.id).map(|a| a.node.as_str()).collect();
                if nodes.len() >= 2 && !f.writers(&s.id).is_empty() {
                    out.push(inst(std::iter::once(s.id.as_str()).chain(nodes)));
                }
            }
        }
        // 31: exactly one node accesses a store, so access is exclusive.
        31 => {
            for s in d.stores() {
                let nodes: BTreeSet<&str> = f.accesses_of(&s.id).map(|a| a.node.as_str()).collect();
                if nodes.len() == 1 {
                    out.push(inst(std::iter::once(s.id.as_str()).chain(nodes)));
                }
            }
        }
        // 32: a mapping prepares an object some node consumes.
        32 => {
            for m in d.mappings() {
                for t in d.object_targets(&m.target_object).unwrap_or_default() {
                    let consumer = match t {
                        ObjectTarget::ActivityInput { node, .. }
                        | ObjectTarget::DataFlowInput { node, .. } => node,
                        ObjectTarget::MessageSend { sender, .. } => sender,
                        _ => continue,
                    };
                    out.push(inst([&m.id, &consumer]));
                }
            }
        }
        // 33: a mapping transforms an object some element produced.
        33 => {
            for m in d.mappings() {
                for s in d.object_sources(&m.source_object).unwrap_or_default() {
                    let producer = match s {
                        ObjectSource::ActivityOutput { node, .. }
                        | ObjectSource::DataFlowOutput { node, .. }
                        | ObjectSource::MessageStart { node, .. } => node,
                        ObjectSource::MessageReceipt { receiver, .. } => receiver,
                        ObjectSource::StoreExtraction { store, .. } => store,
                        ObjectSource::MappingResult { .. } => continue,
                    };
                    out.push(inst([&m.id, &producer]));
                }
            }
        }
        // 34: a task waits for a non-optional input.
        34 => {
            for t in f.tasks() {
                for i in d.inputs_of(&t.id).into_iter().filter(|i| !i.optional) {
                    out.push(inst([&t.id, &i.object]));
                }
            }
        }
        // 36: a task guarantees an output object.
        36 => {
            for t in f.tasks() {
                for o in d.outputs_of(&t.id) {
                    out.push(inst([&t.id, &o.object]));
                }
            }
        }
        // 38: a message event triggers the flow.
        38 => {
            for e in d.nodes().filter(|n| {
                matches!(
                    n.kind,
                    NodeKind::StartEventMessage | NodeKind::IntermediateMessage
                )
            }) {
                for m in d.incoming_messages(&e.id) {
                    out.push(inst([&e.id, &m.id]));
                }
            }
        }
        // 39: a task is triggered by data arriving on a message or on a
        // data flow from another node.
        39 => {
            for t in f.tasks() {
                for i in d.inputs_of(&t.id) {
                    let triggered = match &i.via {
                        Via::Message(_) => true,
                        Via::DataFlow(_) => i.store.is_none(),
                        Via::Sequence(_) => false,
                    };
                    if triggered && !i.optional {
                        out.push(inst([&t.id, &i.object]));
                    }
                }
            }
        }
        // 40: a data-based gateway routes on a guard.
        40 => {
            for g in d
                .nodes()
                .filter(|n| n.kind == NodeKind::GatewayExclusiveData)
            {
                for sf in d.outgoing(&g.id) {
                    if sf.guard.is_some() {
                        out.push(inst([&g.id, &sf.id]));
                    }
                }
            }
        }
        _ => {}
    }
    out
}
