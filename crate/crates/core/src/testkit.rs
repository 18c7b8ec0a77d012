//! Helpers for property tests: a random valid diagram generator, an
//! exhaustive interleaving explorer and post-hoc trace checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::expr::{CmpOp, Expr, Value};
use crate::model::*;
use crate::simulator::{Behaviors, Event, ExecutionState, SimError, Simulator, Trace};

/// Knobs for [`random_diagram`].
#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_pools: usize,
    /// Segments per pool between its start and end event.
    pub max_segments: usize,
    pub exclusive_gateways: bool,
    pub parallel_gateways: bool,
    pub sub_processes: bool,
    pub stores: bool,
    pub messages: bool,
    pub mappings: bool,
    /// External participant feeding a message start event.
    pub external: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_pools: 3,
            max_segments: 6,
            exclusive_gateways: true,
            parallel_gateways: true,
            sub_processes: true,
            stores: true,
            messages: true,
            mappings: true,
            external: true,
        }
    }
}

impl GenConfig {
    /// Single-pool diagrams without exclusive gateways.
    pub fn small() -> Self {
        GenConfig {
            max_pools: 1,
            max_segments: 3,
            exclusive_gateways: false,
            parallel_gateways: true,
            sub_processes: false,
            stores: true,
            messages: false,
            mappings: true,
            external: false,
        }
    }
}

const NAME_BITS: [&str; 10] = [
    "Check",
    "Order",
    "Ship",
    "Bill",
    "Review",
    "Archive",
    "Notify",
    "Données",
    "Form \"A\"",
    "x<y>&z",
];

enum Segment {
    Task,
    Parallel,
    Choice,
    Sub,
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    cfg: GenConfig,
    parts: DiagramParts,
    /// Flows from a task to a task, usable for object hand-over.
    handovers: Vec<(usize, String)>,
    tasks: Vec<(usize, String)>,
    /// Data flows of sub-process stores, moved into the pool once built.
    pending_data: Vec<ExplicitDataFlow>,
    next: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn name(&mut self) -> String {
        let a = NAME_BITS.choose(self.rng).expect("non-empty");
        let b = NAME_BITS.choose(self.rng).expect("non-empty");
        format!("{a} {b}")
    }

    fn scalar(&mut self) -> VarType {
        *[VarType::String, VarType::Number, VarType::Boolean]
            .choose(self.rng)
            .expect("non-empty")
    }

    fn object(&mut self, prefix: &str) -> String {
        let id = self.fresh(prefix);
        let mut o = DataObject::new(id.clone(), self.name());
        o.stereotype = match self.rng.random_range(0..5) {
            0 => Stereotype::Generic,
            1 => Stereotype::Document,
            2 => Stereotype::Product,
            3 => Stereotype::Message,
            _ => Stereotype::Custom("ticket".into()),
        };
        if self.rng.random_bool(0.2) {
            o.physicality = Physicality::Physical;
        }
        if self.rng.random_bool(0.1) {
            o.state = Some("approved".into());
        }
        for i in 0..self.rng.random_range(0..4) {
            let t = self.scalar();
            o.variables.push(Variable::new(format!("v{i}"), t));
        }
        if self.rng.random_bool(0.15) {
            o.variables.push(Variable::new("rec", VarType::Record));
            o.variables.push(Variable::new("rec.x", VarType::String));
        }
        if o.variables.is_empty() && self.rng.random_bool(0.3) {
            o.url = Some("http://example.org/doc".into());
        }
        self.parts.objects.push(o);
        id
    }

    fn node(&mut self, nodes: &mut Vec<Node>, kind: NodeKind) -> String {
        let id = self.fresh(match kind {
            NodeKind::Task => "t",
            NodeKind::SubProcess => "sp",
            NodeKind::GatewayExclusiveData => "x",
            NodeKind::GatewayParallel => "g",
            NodeKind::EndEvent => "end",
            _ => "s",
        });
        let mut n = Node::new(id.clone(), self.name(), kind);
        if kind == NodeKind::Task && self.rng.random_bool(0.15) {
            n.multi_instance = true;
        }
        nodes.push(n);
        id
    }

    fn flow(&mut self, flows: &mut Vec<SequenceFlow>, from: &str, to: &str) -> usize {
        let id = self.fresh("f");
        flows.push(SequenceFlow::new(id, from, to));
        flows.len() - 1
    }

    /// Builds `start -> segments -> end` into `nodes`/`flows` and returns
    /// the start node id.
    fn block(
        &mut self,
        pool: usize,
        nodes: &mut Vec<Node>,
        flows: &mut Vec<SequenceFlow>,
        start_kind: NodeKind,
        depth: usize,
    ) -> String {
        let start = self.node(nodes, start_kind);
        let mut cur = start.clone();
        let segments = self.rng.random_range(1..=self.cfg.max_segments);
        for _ in 0..segments {
            let mut options = vec![Segment::Task, Segment::Task, Segment::Task];
            if self.cfg.parallel_gateways {
                options.push(Segment::Parallel);
            }
            if self.cfg.exclusive_gateways {
                options.push(Segment::Choice);
            }
            if self.cfg.sub_processes && depth == 0 {
                options.push(Segment::Sub);
            }
            cur = match options.choose(self.rng).expect("non-empty") {
                Segment::Task => {
                    let t = self.node(nodes, NodeKind::Task);
                    self.link(pool, flows, &cur, &t, nodes);
                    self.tasks.push((pool, t.clone()));
                    t
                }
                seg @ (Segment::Parallel | Segment::Choice) => {
                    let choice = matches!(seg, Segment::Choice);
                    let kind = if choice {
                        NodeKind::GatewayExclusiveData
                    } else {
                        NodeKind::GatewayParallel
                    };
                    let split = self.node(nodes, kind);
                    let join = self.node(nodes, kind);
                    self.flow(flows, &cur, &split);
                    let branches = self.rng.random_range(2..=3);
                    for b in 0..branches {
                        let t = self.node(nodes, NodeKind::Task);
                        let f = self.flow(flows, &split, &t);
                        if choice && b > 0 {
                            let n = self.rng.random_range(0..10) as f64;
                            flows[f].guard = Some(Expr::cmp(
                                CmpOp::Lt,
                                Expr::num(n),
                                Expr::num(b as f64 * 3.0),
                            ));
                        }
                        self.flow(flows, &t, &join);
                        self.tasks.push((pool, t));
                    }
                    if choice {
                        let n = nodes.iter_mut().find(|n| n.id == split).expect("split");
                        n.condition = Some(Expr::bool(true));
                    }
                    join
                }
                Segment::Sub => {
                    let sp = self.node(nodes, NodeKind::SubProcess);
                    self.link(pool, flows, &cur, &sp, nodes);
                    let mut children = Vec::new();
                    self.block(
                        pool,
                        &mut children,
                        flows,
                        NodeKind::StartEventNone,
                        depth + 1,
                    );
                    if self.cfg.stores && self.rng.random_bool(0.4) {
                        self.local_store(&sp, &mut children, flows);
                    }
                    let node = nodes.iter_mut().find(|n| n.id == sp).expect("sub-process");
                    node.children = children;
                    if let Some(s) = self.parts.stores.last() {
                        if s.scope == StoreScope::SubProcess(sp.clone()) {
                            node.local_stores.push(s.id.clone());
                        }
                    }
                    sp
                }
            };
        }
        let end = self.node(nodes, NodeKind::EndEvent);
        self.flow(flows, &cur, &end);
        start
    }

    /// Connects two nodes and maybe hands an object over between them.
    fn link(
        &mut self,
        pool: usize,
        flows: &mut Vec<SequenceFlow>,
        from: &str,
        to: &str,
        nodes: &[Node],
    ) {
        let f = self.flow(flows, from, to);
        let is_task = |id: &str| nodes.iter().any(|n| n.id == id && n.kind == NodeKind::Task);
        if is_task(from) && is_task(to) && self.rng.random_bool(0.6) {
            let o = self.object("o");
            flows[f]
                .attachments
                .push(ObjectAttachment::output(o.clone()));
            let mut input = ObjectAttachment::input(o);
            input.optional = self.rng.random_bool(0.2);
            flows[f].attachments.push(input);
            self.handovers.push((pool, flows[f].id.clone()));
        }
    }

    /// A store scoped to `sp`, written by one of its tasks.
    fn local_store(&mut self, sp: &str, children: &mut [Node], flows: &mut [SequenceFlow]) {
        let Some(writer) = children
            .iter()
            .find(|n| n.kind == NodeKind::Task)
            .map(|n| n.id.clone())
        else {
            return;
        };
        let Some(out) = flows.iter_mut().find(|f| f.source == writer) else {
            return;
        };
        let store = self.store(StoreScope::SubProcess(sp.to_string()));
        let obj = self.object("w");
        out.attachments.push(ObjectAttachment::output(obj.clone()));
        let df = self.fresh("df");
        self.pending_data.push(ExplicitDataFlow {
            id: df,
            source: writer,
            target: store,
            object: obj,
            optional: false,
        });
    }

    fn store(&mut self, scope: StoreScope) -> String {
        let id = self.fresh("st");
        let mut s = DataStore::new(id.clone(), self.name());
        s.icon = match self.rng.random_range(0..4) {
            0 => StoreIcon::Database,
            1 => StoreIcon::Warehouse,
            2 => StoreIcon::Folder,
            _ => StoreIcon::Custom("cloud".into()),
        };
        s.entities.push(Entity::new(
            "Item",
            &[("code", VarType::String), ("qty", VarType::Number)],
        ));
        if self.rng.random_bool(0.5) {
            s.entities
                .push(Entity::new("Part", &[("code", VarType::String)]));
            s.relationships.push(Relationship {
                name: "contains".into(),
                left: "Item".into(),
                right: "Part".into(),
            });
            s.generalizations.push(Generalization {
                parent: "Item".into(),
                child: "Part".into(),
            });
        }
        s.collapsed = self.rng.random_bool(0.3);
        s.scope = scope;
        self.parts.stores.push(s);
        id
    }
}

impl<R: Rng> Gen<'_, R> {
    fn build(mut self) -> Diagram {
        let pools = self.rng.random_range(1..=self.cfg.max_pools);
        let external = self.cfg.external && self.rng.random_bool(0.4);
        if self.rng.random_bool(0.5) {
            self.parts.id = Some(self.fresh("diagram"));
        }
        for p in 0..pools {
            let mut pool = Pool::new(format!("p{p}"), self.name());
            let kind = if external && p == 0 {
                NodeKind::StartEventMessage
            } else {
                NodeKind::StartEventNone
            };
            let mut nodes = Vec::new();
            let mut flows = Vec::new();
            self.block(p, &mut nodes, &mut flows, kind, 0);
            pool.nodes = nodes;
            pool.sequence_flows = flows;
            pool.explicit_data_flows = std::mem::take(&mut self.pending_data);
            self.parts.pools.push(pool);
        }
        if external {
            self.external_start();
        }
        if self.cfg.stores && self.rng.random_bool(0.6) {
            self.shared_store();
        }
        if self.cfg.messages && pools > 1 && self.rng.random_bool(0.6) {
            self.message();
        }
        if self.cfg.mappings && self.rng.random_bool(0.7) {
            self.mapping();
        }
        Diagram::from_parts(self.parts).expect("generated diagrams are well formed")
    }

    fn external_start(&mut self) {
        let mut ext = Pool::external("ext", "Customer");
        ext.name = self.name();
        self.parts.pools.push(ext);
        let start = self.parts.pools[0].nodes[0].id.clone();
        let obj = self.object("in");
        if let Some(o) = self.parts.objects.iter_mut().find(|o| o.id == obj) {
            if let Some(v) = o.variables.first_mut() {
                v.optional = self.rng.random_bool(0.3);
            }
        }
        let mut m = MessageFlow::new(self.fresh("m"), "ext", start.clone());
        m.attachments.push(ObjectAttachment::input(obj.clone()));
        self.parts.message_flows.push(m);
        // The object is handed to whatever follows the start event.
        let f = self.parts.pools[0]
            .sequence_flows
            .iter_mut()
            .find(|f| f.source == start)
            .expect("start has an outgoing flow");
        f.attachments.push(ObjectAttachment::output(obj.clone()));
        f.attachments.push(ObjectAttachment::input(obj));
    }

    /// A diagram-scoped store written by one task and read by a later one.
    fn shared_store(&mut self) {
        let top: Vec<(usize, String)> = self
            .tasks
            .iter()
            .filter(|(p, t)| {
                self.parts.pools[*p].nodes.iter().any(|n| &n.id == t)
                    && self.parts.pools[*p]
                        .sequence_flows
                        .iter()
                        .any(|f| &f.source == t)
            })
            .cloned()
            .collect();
        if top.len() < 2 {
            return;
        }
        let (wp, writer) = top[0].clone();
        let (rp, reader) = top[top.len() - 1].clone();
        let store = self.store(StoreScope::Diagram);

        let written = self.object("w");
        let out = self.parts.pools[wp]
            .sequence_flows
            .iter_mut()
            .find(|f| f.source == writer)
            .expect("writer has an outgoing flow");
        out.attachments
            .push(ObjectAttachment::output(written.clone()));
        let df = self.fresh("df");
        self.parts.pools[wp]
            .explicit_data_flows
            .push(ExplicitDataFlow {
                id: df,
                source: writer,
                target: store.clone(),
                object: written,
                optional: false,
            });

        let read = self.fresh("r");
        let mut o = DataObject::new(read.clone(), self.name());
        o.origin_store = Some(store.clone());
        o.variables
            .push(Variable::new("Item.code", VarType::String));
        self.parts.objects.push(o);
        let df = self.fresh("df");
        let optional = self.rng.random_bool(0.2);
        self.parts.pools[rp]
            .explicit_data_flows
            .push(ExplicitDataFlow {
                id: df,
                source: store,
                target: reader.clone(),
                object: read.clone(),
                optional,
            });
        let out = self.parts.pools[rp]
            .sequence_flows
            .iter_mut()
            .find(|f| f.source == reader)
            .expect("reader has an outgoing flow");
        out.attachments.push(ObjectAttachment::output(read));
    }

    /// A message from a task of the first pool to a task of the second.
    fn message(&mut self) {
        let pick = |pool: usize, tasks: &[(usize, String)]| {
            tasks
                .iter()
                .find(|(p, _)| *p == pool)
                .map(|(_, t)| t.clone())
        };
        let (Some(from), Some(to)) = (pick(0, &self.tasks), pick(1, &self.tasks)) else {
            return;
        };
        let obj = self.object("msg");
        let mut m = MessageFlow::new(self.fresh("m"), from, to);
        m.attachments.push(ObjectAttachment::output(obj.clone()));
        m.attachments.push(ObjectAttachment::input(obj));
        self.parts.message_flows.push(m);
    }

    /// Name of a scalar variable of `object`, adding one if needed.
    fn scalar_var(&mut self, object: &str) -> String {
        let o = self
            .parts
            .objects
            .iter_mut()
            .find(|o| o.id == object)
            .expect("object exists");
        if let Some(v) = o.variables.iter().find(|v| v.vtype.is_scalar()) {
            return v.name.clone();
        }
        o.url = None;
        o.variables.push(Variable::new("key", VarType::String));
        "key".into()
    }

    /// A mapping between two objects handed over along one chain.
    fn mapping(&mut self) {
        let carried = |p: usize, f: &str| {
            self.parts.pools[p]
                .sequence_flows
                .iter()
                .find(|x| x.id == f)
                .map(|x| x.attachments[0].object.clone())
        };
        // Hand-overs are recorded in chain order, so a later one in the
        // same pool is downstream of an earlier one.
        let mut candidates = Vec::new();
        for (i, (p, f)) in self.handovers.iter().enumerate() {
            for (q, g) in &self.handovers[i + 1..] {
                if p == q {
                    if let (Some(a), Some(b)) = (carried(*p, f), carried(*q, g)) {
                        candidates.push((a, b));
                    }
                }
            }
        }
        let Some((src, dst)) = candidates.choose(self.rng).cloned() else {
            return;
        };
        let (sv, tv) = (self.scalar_var(&src), self.scalar_var(&dst));
        let from = if self.rng.random_bool(0.7) {
            Expr::path(format!("{src}.{sv}"))
        } else {
            Expr::cmp(CmpOp::Ne, Expr::path(format!("{src}.{sv}")), Expr::str("x"))
        };
        let id = self.fresh("dm");
        self.parts.mappings.push(DataMapping {
            id,
            source_object: src,
            target_object: dst.clone(),
            rules: vec![CopyRule {
                from,
                to: format!("{dst}.{tv}"),
            }],
        });
    }
}

/// A random diagram that validates without errors.
pub fn random_diagram<R: Rng>(rng: &mut R, cfg: GenConfig) -> Diagram {
    Gen {
        rng,
        cfg,
        parts: DiagramParts::default(),
        handovers: Vec::new(),
        tasks: Vec::new(),
        pending_data: Vec::new(),
        next: 0,
    }
    .build()
}

/// Start inputs binding every variable of every externally supplied
/// object to a type-appropriate placeholder.
pub fn default_inputs(d: &Diagram) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    for m in d.message_flows() {
        if !d.is_external(&m.source) {
            continue;
        }
        for a in &m.attachments {
            let Some(o) = d.object(&a.object) else {
                continue;
            };
            for v in &o.variables {
                let value = match v.vtype {
                    VarType::String | VarType::Record => Value::Str("x".into()),
                    VarType::Number => Value::Num(1.0),
                    VarType::Boolean => Value::Bool(true),
                };
                out.insert(format!("{}.{}", o.id, v.name), value);
            }
        }
    }
    out
}

/// Every set of nodes fired by some maximal interleaving, up to
/// `max_steps` firings per path.
pub fn explore(
    d: &Diagram,
    behaviors: &Behaviors,
    inputs: &BTreeMap<String, Value>,
    max_steps: u64,
) -> Result<BTreeSet<BTreeSet<String>>, SimError> {
    let sim = Simulator::new(d, behaviors)?;
    let (state, trace) = sim.init(inputs)?;
    let base: BTreeSet<String> = trace.fired().into_iter().map(str::to_string).collect();
    let mut memo = HashMap::new();
    let tails = suffixes(&sim, state, max_steps, &mut memo)?;
    Ok(tails
        .into_iter()
        .map(|t| base.union(&t).cloned().collect())
        .collect())
}

type Memo = HashMap<String, BTreeSet<BTreeSet<String>>>;

fn suffixes(
    sim: &Simulator<'_>,
    state: ExecutionState,
    budget: u64,
    memo: &mut Memo,
) -> Result<BTreeSet<BTreeSet<String>>, SimError> {
    let key = format!("{budget}|{state:?}");
    if let Some(hit) = memo.get(&key) {
        return Ok(hit.clone());
    }
    let enabled = sim.enabled(&state);
    let mut out = BTreeSet::new();
    if enabled.is_empty() || budget == 0 {
        out.insert(BTreeSet::new());
    }
    if budget > 0 {
        for n in enabled {
            let mut next = state.clone();
            let delta = sim.fire(&mut next, &n)?;
            let fired: BTreeSet<String> = delta.fired().into_iter().map(str::to_string).collect();
            for tail in suffixes(sim, next, budget - 1, memo)? {
                out.insert(fired.union(&tail).cloned().collect());
            }
        }
    }
    memo.insert(key, out.clone());
    Ok(out)
}

/// Checks that no node fired while one of its required inputs was
/// unavailable. Objects handed over on plain sequence or node-to-node
/// data flows must be bound at an earlier step than the consumer fires.
pub fn check_data_gating(d: &Diagram, trace: &Trace) -> Result<(), String> {
    let mut bound: BTreeMap<&str, u64> = BTreeMap::new();
    for e in &trace.entries {
        match &e.event {
            Event::ObjectBound { object, .. } => {
                bound.entry(object.as_str()).or_insert(e.step);
            }
            Event::NodeFired { node } => {
                let by_message: BTreeSet<String> = d
                    .incoming_messages(node)
                    .iter()
                    .flat_map(|m| m.attachments.iter().map(|a| a.object.clone()))
                    .collect();
                for i in d.inputs_of(node).into_iter().filter(|i| !i.optional) {
                    let Some(&at) = bound.get(i.object.as_str()) else {
                        return Err(format!(
                            "step {}: `{node}` fired with `{}` unbound",
                            e.step, i.object
                        ));
                    };
                    let mapped = d.mappings().iter().any(|m| m.target_object == i.object);
                    let plain = !matches!(i.via, Via::Message(_))
                        && i.store.is_none()
                        && !mapped
                        && !by_message.contains(&i.object);
                    if plain && at >= e.step {
                        return Err(format!(
                            "step {}: `{node}` fired before `{}` was produced",
                            e.step, i.object
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Removes the element `id` together with everything referring to it.
/// Returns `None` when the result is not a well-formed diagram.
pub fn delete_element(d: &Diagram, id: &str) -> Option<Diagram> {
    let mut p = d.parts().clone();
    p.pools.retain(|x| x.id != id);
    p.stores.retain(|x| x.id != id);
    p.objects.retain(|x| x.id != id);
    p.mappings
        .retain(|m| m.id != id && m.source_object != id && m.target_object != id);
    p.message_flows
        .retain(|m| m.id != id && m.source != id && m.target != id);
    for m in &mut p.message_flows {
        m.attachments.retain(|a| a.object != id);
    }
    for o in &mut p.objects {
        if o.origin_store.as_deref() == Some(id) {
            o.origin_store = None;
        }
    }
    fn prune(nodes: &mut Vec<Node>, id: &str) {
        nodes.retain(|n| n.id != id);
        for n in nodes {
            n.local_stores.retain(|s| s != id);
            prune(&mut n.children, id);
        }
    }
    for pool in &mut p.pools {
        prune(&mut pool.nodes, id);
        pool.sequence_flows
            .retain(|f| f.id != id && f.source != id && f.target != id);
        for f in &mut pool.sequence_flows {
            f.attachments.retain(|a| a.object != id);
        }
        pool.explicit_data_flows
            .retain(|f| f.id != id && f.source != id && f.target != id && f.object != id);
    }
    p.stores.retain(|s| match &s.scope {
        StoreScope::SubProcess(sp) => sp != id,
        StoreScope::Diagram => true,
    });
    Diagram::from_parts(p).ok()
}
