//! Well-formedness rules V1 to V9.
//!
//! | rule | severity | checks |
//! |------|----------|--------|
//! | V1 | error | every used object has a source and a target |
//! | V2 | error | `optional` only on inputs |
//! | V3 | error | mappings connect a produced object to a consumed one on a path, and copy paths resolve |
//! | V4 | error | store entity graphs are well formed |
//! | V5 | error | store access stays within the store's scope |
//! | V6 | error | message flows join distinct pools |
//! | V7 | error | pools and sub-processes have start and end events, nodes are connected |
//! | V8 | error | objects derived from a store only use that store's fields |
//! | V9 | warning | collapsed stores have some structure to expand |

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::model::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
    V9,
}

impl Rule {
    pub const ALL: [Rule; 9] = [
        Rule::V1,
        Rule::V2,
        Rule::V3,
        Rule::V4,
        Rule::V5,
        Rule::V6,
        Rule::V7,
        Rule::V8,
        Rule::V9,
    ];

    pub fn severity(self) -> Severity {
        match self {
            Rule::V9 => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for Rule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Diagnostic {
    pub rule: Rule,
    pub severity: Severity,
    pub element: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}: {}",
            self.rule, self.severity, self.element, self.message
        )
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

pub fn validate(d: &Diagram) -> Vec<Diagnostic> {
    let mut out = Out::default();
    v1_sources_and_targets(d, &mut out);
    v2_optional_inputs(d, &mut out);
    v3_mappings(d, &mut out);
    v4_entity_graphs(d, &mut out);
    v5_scopes(d, &mut out);
    v6_message_pools(d, &mut out);
    v7_events(d, &mut out);
    v8_origin_store(d, &mut out);
    v9_collapsed(d, &mut out);
    let mut diags = out.0;
    diags.sort();
    diags.dedup();
    diags
}

#[derive(Default)]
struct Out(Vec<Diagnostic>);

impl Out {
    fn push(&mut self, rule: Rule, element: &str, message: String) {
        self.0.push(Diagnostic {
            rule,
            severity: rule.severity(),
            element: element.to_string(),
            message,
        });
    }
}

fn v1_sources_and_targets(d: &Diagram, out: &mut Out) {
    for o in d.objects() {
        let sources = d.object_sources(&o.id).unwrap_or_default();
        let targets = d.object_targets(&o.id).unwrap_or_default();
        if sources.is_empty() && targets.is_empty() {
            continue;
        }
        let external_only = sources
            .iter()
            .filter_map(ObjectSource::flow)
            .chain(targets.iter().filter_map(ObjectTarget::flow))
            .all(|f| {
                d.message_flow(f)
                    .is_some_and(|m| d.is_external(&m.source) || d.is_external(&m.target))
            })
            && sources.iter().all(|s| s.flow().is_some())
            && targets.iter().all(|t| t.flow().is_some());
        if external_only {
            continue;
        }
        // A store-side data flow also hands the object to or from its node.
        let extracted = sources
            .iter()
            .any(|s| matches!(s, ObjectSource::StoreExtraction { .. }));
        let inserted = targets
            .iter()
            .any(|t| matches!(t, ObjectTarget::StoreInsertion { .. }));
        if sources.is_empty() && !inserted {
            out.push(
                Rule::V1,
                &o.id,
                "object is consumed but never produced".into(),
            );
        }
        if targets.is_empty() && !extracted {
            out.push(
                Rule::V1,
                &o.id,
                "object is produced but never consumed".into(),
            );
        }
    }
}

fn v2_optional_inputs(d: &Diagram, out: &mut Out) {
    let check = |flow: &str, atts: &[ObjectAttachment], out: &mut Out| {
        for a in atts {
            if a.optional && a.direction == Direction::Output {
                out.push(
                    Rule::V2,
                    flow,
                    format!("output `{}` is marked optional", a.object),
                );
            }
        }
    };
    for f in d.sequence_flows() {
        check(&f.id, &f.attachments, out);
    }
    for m in d.message_flows() {
        check(&m.id, &m.attachments, out);
    }
    for f in d.data_flows() {
        if f.optional && d.store(&f.target).is_some() {
            out.push(
                Rule::V2,
                &f.id,
                format!(
                    "insertion of `{}` into `{}` is marked optional",
                    f.object, f.target
                ),
            );
        }
    }
}

/// Elements where `object` comes into being, following mappings back to
/// their own sources.
fn producers(d: &Diagram, object: &str, seen: &mut HashSet<String>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if !seen.insert(object.to_string()) {
        return out;
    }
    for s in d.object_sources(object).unwrap_or_default() {
        match s {
            ObjectSource::StoreExtraction { store, .. } => {
                out.insert(store);
            }
            ObjectSource::ActivityOutput { node, .. }
            | ObjectSource::DataFlowOutput { node, .. }
            | ObjectSource::MessageStart { node, .. } => {
                out.insert(node);
            }
            ObjectSource::MessageReceipt { receiver, .. } => {
                out.insert(receiver);
            }
            ObjectSource::MappingResult { mapping } => {
                if let Some(m) = d.mapping(&mapping) {
                    out.extend(producers(d, &m.source_object, seen));
                }
            }
        }
    }
    out
}

/// Elements that take `object` in, following mappings forward.
fn consumers(d: &Diagram, object: &str, seen: &mut HashSet<String>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if !seen.insert(object.to_string()) {
        return out;
    }
    for t in d.object_targets(object).unwrap_or_default() {
        match t {
            ObjectTarget::StoreInsertion { store, .. } => {
                out.insert(store);
            }
            ObjectTarget::ActivityInput { node, .. } | ObjectTarget::DataFlowInput { node, .. } => {
                out.insert(node);
            }
            ObjectTarget::MessageSend { sender, .. } => {
                out.insert(sender);
            }
            ObjectTarget::MappingInput { mapping } => {
                if let Some(m) = d.mapping(&mapping) {
                    out.extend(consumers(d, &m.target_object, seen));
                }
            }
        }
    }
    out
}

fn v3_mappings(d: &Diagram, out: &mut Out) {
    for m in d.mappings() {
        let (Some(src), Some(dst)) = (d.object(&m.source_object), d.object(&m.target_object))
        else {
            continue;
        };
        if m.rules.is_empty() {
            out.push(Rule::V3, &m.id, "mapping has no copy rules".into());
        }
        if m.source_object == m.target_object {
            out.push(
                Rule::V3,
                &m.id,
                "mapping source and target are the same object".into(),
            );
        }
        let prod = producers(d, &src.id, &mut HashSet::new());
        let cons = consumers(d, &dst.id, &mut HashSet::new());
        if prod.is_empty() {
            out.push(
                Rule::V3,
                &m.id,
                format!("source object `{}` is not produced by any element", src.id),
            );
        }
        if cons.is_empty() {
            out.push(
                Rule::V3,
                &m.id,
                format!("target object `{}` is not consumed by any element", dst.id),
            );
        }
        if !prod.is_empty() && !cons.is_empty() {
            let connected = prod.iter().any(|p| {
                let reach = d.reachable_from(p);
                cons.iter().any(|c| c != p && reach.contains(c))
            });
            if !connected {
                out.push(
                    Rule::V3,
                    &m.id,
                    format!(
                        "no path leads from a producer of `{}` to a consumer of `{}`",
                        src.id, dst.id
                    ),
                );
            }
        }
        for (i, r) in m.rules.iter().enumerate() {
            for path in r.from.paths() {
                let resolves = path
                    .split_once('.')
                    .is_some_and(|(obj, var)| obj == src.id && src.variable(var).is_some());
                if !resolves {
                    out.push(
                        Rule::V3,
                        &m.id,
                        format!("rule {}: `{path}` is not a variable of `{}`", i + 1, src.id),
                    );
                }
            }
            match r.to.split_once('.') {
                Some((obj, var)) if obj == dst.id => match dst.variable(var) {
                    Some(v) if v.vtype.is_scalar() => {}
                    Some(_) => out.push(
                        Rule::V3,
                        &m.id,
                        format!("rule {}: `{}` is a record, not a scalar", i + 1, r.to),
                    ),
                    None => out.push(
                        Rule::V3,
                        &m.id,
                        format!(
                            "rule {}: `{}` is not a variable of `{}`",
                            i + 1,
                            r.to,
                            dst.id
                        ),
                    ),
                },
                _ => out.push(
                    Rule::V3,
                    &m.id,
                    format!(
                        "rule {}: `{}` does not name a variable of `{}`",
                        i + 1,
                        r.to,
                        dst.id
                    ),
                ),
            }
        }
    }
}

fn v4_entity_graphs(d: &Diagram, out: &mut Out) {
    for s in d.stores() {
        let mut names = HashSet::new();
        for e in &s.entities {
            if !names.insert(e.name.as_str()) {
                out.push(
                    Rule::V4,
                    &s.id,
                    format!("entity `{}` is declared twice", e.name),
                );
            }
            let mut fields = HashSet::new();
            for f in &e.fields {
                if !fields.insert(f.name.as_str()) {
                    out.push(
                        Rule::V4,
                        &s.id,
                        format!("field `{}.{}` is declared twice", e.name, f.name),
                    );
                }
            }
        }
        for r in &s.relationships {
            for end in [&r.left, &r.right] {
                if !names.contains(end.as_str()) {
                    out.push(
                        Rule::V4,
                        &s.id,
                        format!("relationship `{}` refers to unknown entity `{end}`", r.name),
                    );
                }
            }
        }
        let mut edges: HashMap<&str, Vec<&str>> = HashMap::new();
        for g in &s.generalizations {
            if g.parent == g.child {
                out.push(
                    Rule::V4,
                    &s.id,
                    format!("entity `{}` generalizes itself", g.parent),
                );
                continue;
            }
            let mut ok = true;
            for end in [&g.parent, &g.child] {
                if !names.contains(end.as_str()) {
                    ok = false;
                    out.push(
                        Rule::V4,
                        &s.id,
                        format!("generalization refers to unknown entity `{end}`"),
                    );
                }
            }
            if ok {
                edges
                    .entry(g.parent.as_str())
                    .or_default()
                    .push(g.child.as_str());
            }
        }
        if let Some(e) = find_cycle(&edges) {
            out.push(
                Rule::V4,
                &s.id,
                format!("generalizations form a cycle through `{e}`"),
            );
        }
    }
}

/// Smallest vertex on some cycle, if the graph has one.
fn find_cycle<'a>(edges: &HashMap<&'a str, Vec<&'a str>>) -> Option<&'a str> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        v: &'a str,
        edges: &HashMap<&'a str, Vec<&'a str>>,
        marks: &mut HashMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Option<&'a str> {
        match marks.get(v) {
            Some(Mark::Done) => return None,
            Some(Mark::Active) => {
                let start = stack.iter().position(|s| *s == v).unwrap_or(0);
                return stack[start..].iter().min().copied();
            }
            None => {}
        }
        marks.insert(v, Mark::Active);
        stack.push(v);
        for &w in edges.get(v).into_iter().flatten() {
            if let Some(c) = visit(w, edges, marks, stack) {
                return Some(c);
            }
        }
        stack.pop();
        marks.insert(v, Mark::Done);
        None
    }
    let mut roots: Vec<&str> = edges.keys().copied().collect();
    roots.sort_unstable();
    let mut marks = HashMap::new();
    for r in roots {
        if let Some(c) = visit(r, edges, &mut marks, &mut Vec::new()) {
            return Some(c);
        }
    }
    None
}

fn v5_scopes(d: &Diagram, out: &mut Out) {
    for a in d.store_accesses() {
        let Ok(scope) = d.resolve_scope(&a.store) else {
            continue;
        };
        if !scope.contains(&a.node) {
            let verb = match a.kind {
                AccessKind::Read => "reads",
                AccessKind::Write => "writes",
            };
            out.push(
                Rule::V5,
                &a.flow,
                format!("`{}` {verb} store `{}` outside its scope", a.node, a.store),
            );
        }
    }
    for n in d.nodes() {
        for s in &n.local_stores {
            let Some(store) = d.store(s) else { continue };
            if store.scope != StoreScope::SubProcess(n.id.clone()) {
                out.push(
                    Rule::V5,
                    &n.id,
                    format!("local store `{s}` is not scoped to this sub-process"),
                );
            }
        }
    }
}

fn v6_message_pools(d: &Diagram, out: &mut Out) {
    for m in d.message_flows() {
        let (Some(a), Some(b)) = (d.pool_of(&m.source), d.pool_of(&m.target)) else {
            continue;
        };
        if a.id == b.id {
            let message = if m.attachments.is_empty() {
                format!("message flow stays inside pool `{}`", a.id)
            } else {
                format!("message objects exchanged inside pool `{}`", a.id)
            };
            out.push(Rule::V6, &m.id, message);
        }
    }
}

fn v7_events(d: &Diagram, out: &mut Out) {
    let check_block = |owner: &str, what: &str, nodes: &[Node], out: &mut Out| {
        if !nodes.iter().any(|n| n.kind.is_start()) {
            out.push(Rule::V7, owner, format!("{what} has no start event"));
        }
        if !nodes.iter().any(|n| n.kind == NodeKind::EndEvent) {
            out.push(Rule::V7, owner, format!("{what} has no end event"));
        }
    };
    for p in d.pools() {
        if !p.external {
            check_block(&p.id, "pool", &p.nodes, out);
        }
    }
    for n in d.nodes() {
        if n.kind == NodeKind::SubProcess {
            check_block(&n.id, "sub-process", &n.children, out);
        }
        let has_in = !d.incoming(&n.id).is_empty();
        let has_out = !d.outgoing(&n.id).is_empty();
        let (needs_in, needs_out) = match n.kind {
            NodeKind::StartEventNone | NodeKind::StartEventMessage => (false, true),
            NodeKind::EndEvent => (true, false),
            _ => (true, true),
        };
        if needs_in && !has_in {
            out.push(Rule::V7, &n.id, "node has no incoming sequence flow".into());
        }
        if needs_out && !has_out {
            out.push(Rule::V7, &n.id, "node has no outgoing sequence flow".into());
        }
    }
}

fn v8_origin_store(d: &Diagram, out: &mut Out) {
    for o in d.objects() {
        let Some(store) = o.origin_store.as_deref().and_then(|s| d.store(s)) else {
            continue;
        };
        for v in &o.variables {
            if store.field(&v.name).is_none() {
                out.push(
                    Rule::V8,
                    &o.id,
                    format!("`{}` is not a field of store `{}`", v.name, store.id),
                );
            }
        }
    }
}

fn v9_collapsed(d: &Diagram, out: &mut Out) {
    for s in d.stores() {
        if s.collapsed && s.entities.is_empty() {
            out.push(
                Rule::V9,
                &s.id,
                "collapsed store has no structure to expand".into(),
            );
        }
    }
}
