use std::collections::{BTreeMap, BTreeSet};

use super::skeleton::{structure, Block};
use super::xml::Element;
use super::{check, message_only, split_path, CodegenError, Output};
use crate::model::{DataMapping, Diagram, NodeKind, StoreScope, Via};

const NAMESPACE: &str = "http://schemas.xmlsoap.org/ws/2003/03/business-process/";
const TNS: &str = "urn:bpdmn:placeholder";

/// Attributes whose values are placeholders for WSDL wiring.
pub const PLACEHOLDER_ATTRIBUTES: [&str; 3] = ["partnerLink", "portType", "operation"];

struct Gen<'d> {
    d: &'d Diagram,
    skipped: BTreeSet<&'d str>,
    pending: BTreeMap<&'d str, &'d DataMapping>,
    warnings: Vec<String>,
}

pub fn to_bpel(d: &Diagram) -> Result<Output, CodegenError> {
    check(d)?;
    let mut g = Gen {
        d,
        skipped: BTreeSet::new(),
        pending: d.mappings().iter().map(|m| (m.id.as_str(), m)).collect(),
        warnings: Vec::new(),
    };
    let mut process = Element::new("process")
        .attr("name", d.id().unwrap_or("process"))
        .attr("targetNamespace", TNS)
        .attr("xmlns", NAMESPACE)
        .attr("xmlns:tns", TNS);
    process.push(g.variables());

    let mut threads = Vec::new();
    for pool in d.pools().iter().filter(|p| !p.external) {
        let (block, warnings) = structure(d, &pool.nodes);
        g.warnings.extend(
            warnings
                .into_iter()
                .map(|w| format!("pool `{}`: {w}", pool.id)),
        );
        let mut seq = Element::new("sequence").attr("name", pool.id.as_str());
        g.emit_into(&mut seq, &block);
        threads.push(seq);
    }
    // Mappings with no consuming activity run up front.
    let leftovers: Vec<Element> = std::mem::take(&mut g.pending)
        .into_values()
        .map(assign)
        .collect();
    let mut body = match threads.len() {
        0 => Element::new("sequence"),
        1 => threads.pop().expect("one thread"),
        _ => {
            let mut flow = Element::new("flow");
            threads.into_iter().for_each(|t| flow.push(t));
            flow
        }
    };
    if !leftovers.is_empty() {
        let mut seq = Element::new("sequence");
        leftovers.into_iter().for_each(|a| seq.push(a));
        seq.push(body);
        body = seq;
    }
    process.push(body);
    Ok(Output {
        text: process.to_document(),
        warnings: g.warnings,
    })
}

fn assign(m: &DataMapping) -> Element {
    let mut a = Element::new("assign").attr("name", m.id.as_str());
    for rule in &m.rules {
        let from = match rule.from.as_path().filter(|p| p.contains('.')) {
            Some(path) => {
                let (var, part) = split_path(path);
                Element::new("from")
                    .attr("variable", var)
                    .attr_opt("part", part)
            }
            None => Element::new("from").attr("expression", rule.from.to_string()),
        };
        let (var, part) = split_path(&rule.to);
        let to = Element::new("to")
            .attr("variable", var)
            .attr_opt("part", part);
        a.push(Element::new("copy").child(from).child(to));
    }
    a
}

fn placeholders(e: Element, operation: &str) -> Element {
    e.attr("partnerLink", "partner")
        .attr("portType", "tns:port")
        .attr("operation", operation)
}

impl<'d> Gen<'d> {
    fn variables(&mut self) -> Element {
        let d = self.d;
        let mut vars = Element::new("variables");
        let mut stores: Vec<_> = d.stores().iter().collect();
        stores.sort_by(|a, b| a.id.cmp(&b.id));
        for s in stores {
            if let StoreScope::SubProcess(sp) = &s.scope {
                self.warnings.push(format!(
                    "store `{}` is scoped to sub-process `{sp}`; its variables are declared at process level",
                    s.id
                ));
            }
            for e in &s.entities {
                let name = format!("{}.{}", s.id, e.name);
                let fields: Vec<&str> = e.fields.iter().map(|f| f.name.as_str()).collect();
                vars.comment(format!(
                    "store {} entity {}: element type with fields {}",
                    s.id,
                    e.name,
                    if fields.is_empty() {
                        "(none)".to_string()
                    } else {
                        fields.join(" ")
                    }
                ));
                vars.push(
                    Element::new("variable")
                        .attr("name", name.as_str())
                        .attr("element", format!("tns:{name}")),
                );
            }
        }
        let mut objects: Vec<_> = d.objects().iter().collect();
        objects.sort_by(|a, b| a.id.cmp(&b.id));
        for o in objects {
            if message_only(d, &o.id) {
                self.warnings.push(format!(
                    "object `{}` travels only on message flows; BPEL has no equivalent, skipped",
                    o.id
                ));
                self.skipped.insert(o.id.as_str());
                continue;
            }
            vars.push(
                Element::new("variable")
                    .attr("name", o.id.as_str())
                    .attr("messageType", o.message_type()),
            );
        }
        vars
    }

    /// Appends the activities for `b` to `parent`, flattening sequences.
    fn emit_into(&mut self, parent: &mut Element, b: &Block) {
        match b {
            Block::Seq(bs) => bs.iter().for_each(|b| self.emit_into(parent, b)),
            _ => {
                for e in self.emit(b) {
                    parent.push(e);
                }
            }
        }
    }

    /// One activity for `b`, wrapping multiple in a sequence.
    fn single(&mut self, b: &Block) -> Element {
        let mut seq = Element::new("sequence");
        self.emit_into(&mut seq, b);
        let mut kids: Vec<Element> = Vec::new();
        for c in seq.children.drain(..) {
            if let super::xml::Child::Elem(e) = c {
                kids.push(e);
            }
        }
        match kids.len() {
            0 => Element::new("empty"),
            1 => kids.pop().expect("one"),
            _ => {
                kids.into_iter().for_each(|k| seq.push(k));
                seq
            }
        }
    }

    fn emit(&mut self, b: &Block) -> Vec<Element> {
        match b {
            Block::Seq(_) => vec![self.single(b)],
            Block::Parallel(bs) => {
                let mut flow = Element::new("flow");
                for b in bs {
                    let e = self.single(b);
                    flow.push(e);
                }
                vec![flow]
            }
            Block::Choice { gateway, branches } => {
                let mut iff = Element::new("if").attr("name", gateway.as_str());
                let mut seen_default = false;
                let mut otherwise = None;
                for (i, (guard, b)) in branches.iter().enumerate() {
                    // Only the first unguarded branch can run; later ones
                    // are kept with a false condition.
                    let cond = match guard {
                        Some(g) => Some(g.to_string()),
                        None if i == 0 => Some("true()".to_string()),
                        None if seen_default => Some("false()".to_string()),
                        None => None,
                    };
                    seen_default |= guard.is_none();
                    let body = self.single(b);
                    match (i, cond) {
                        (0, Some(c)) => {
                            iff.push(Element::new("condition").text(c));
                            iff.push(body);
                        }
                        (_, Some(c)) => iff.push(
                            Element::new("elseif")
                                .child(Element::new("condition").text(c))
                                .child(body),
                        ),
                        (_, None) => otherwise = Some(Element::new("else").child(body)),
                    }
                }
                if let Some(e) = otherwise {
                    iff.push(e);
                }
                vec![iff]
            }
            Block::Node(id) => self.node(id),
        }
    }

    fn mappings_for(&mut self, node: &str) -> Vec<Element> {
        // Mappings feeding this node's inputs, with the mappings feeding
        // their sources first.
        let mut wanted: Vec<String> = self
            .d
            .inputs_of(node)
            .into_iter()
            .map(|i| i.object)
            .collect();
        let mut chain: Vec<&DataMapping> = Vec::new();
        while let Some(obj) = wanted.pop() {
            let hits: Vec<&str> = self
                .pending
                .iter()
                .filter(|(_, m)| m.target_object == obj)
                .map(|(id, _)| *id)
                .collect();
            for id in hits {
                let m = self.pending.remove(id).expect("pending");
                wanted.push(m.source_object.clone());
                chain.push(m);
            }
        }
        chain.into_iter().rev().map(assign).collect()
    }

    fn objects(&self, list: impl IntoIterator<Item = String>) -> Vec<String> {
        let set: BTreeSet<String> = list
            .into_iter()
            .filter(|o| !self.skipped.contains(o.as_str()))
            .collect();
        set.into_iter().collect()
    }

    fn first(&mut self, node: &str, what: &str, objs: &[String]) -> Option<String> {
        if objs.len() > 1 {
            self.warnings.push(format!(
                "`{node}` has {} {what} objects; BPEL takes one, also used: {}",
                objs.len(),
                objs[1..].join(", ")
            ));
        }
        objs.first().cloned()
    }

    fn node(&mut self, id: &str) -> Vec<Element> {
        let d = self.d;
        let node = d.node(id).expect("skeleton nodes exist");
        let mut out = self.mappings_for(id);
        match node.kind {
            NodeKind::Task => {
                let ins = self.objects(d.inputs_of(id).into_iter().map(|i| i.object));
                let outs = self.objects(d.outputs_of(id).into_iter().map(|o| o.object));
                let input = self.first(id, "input", &ins);
                let output = self.first(id, "output", &outs);
                let invoke = Element::new("invoke")
                    .attr("name", node.name.as_str())
                    .attr_opt("inputVariable", input)
                    .attr_opt("outputVariable", output);
                out.push(placeholders(invoke, id));
            }
            NodeKind::SubProcess => {
                let (block, warnings) = structure(d, &node.children);
                self.warnings.extend(
                    warnings
                        .into_iter()
                        .map(|w| format!("sub-process `{id}`: {w}")),
                );
                let body = self.single(&block);
                out.push(
                    Element::new("scope")
                        .attr("name", node.name.as_str())
                        .child(body),
                );
            }
            NodeKind::StartEventMessage | NodeKind::IntermediateMessage => {
                let received = self.objects(
                    d.inputs_of(id)
                        .into_iter()
                        .filter(|i| matches!(i.via, Via::Message(_)))
                        .map(|i| i.object),
                );
                let var = self.first(id, "received", &received);
                let mut receive = Element::new("receive")
                    .attr("name", node.name.as_str())
                    .attr_opt("variable", var);
                if node.kind == NodeKind::StartEventMessage {
                    receive = receive.attr("createInstance", "yes");
                }
                out.push(placeholders(receive, id));
            }
            NodeKind::EndEvent => {
                let starters = self.starter_pools(id);
                for m in d.outgoing_messages(id) {
                    let sent = self.objects(
                        m.attachments
                            .iter()
                            .filter(|a| a.direction == crate::model::Direction::Output)
                            .map(|a| a.object.clone()),
                    );
                    let var = self.first(id, "sent", &sent);
                    let answers = d
                        .pool_of(&m.target)
                        .is_some_and(|p| starters.contains(p.id.as_str()));
                    let e = if answers {
                        Element::new("reply")
                            .attr("name", node.name.as_str())
                            .attr_opt("variable", var)
                    } else {
                        Element::new("invoke")
                            .attr("name", node.name.as_str())
                            .attr_opt("inputVariable", var)
                    };
                    out.push(placeholders(e, &m.id));
                }
            }
            NodeKind::StartEventNone
            | NodeKind::GatewayExclusiveData
            | NodeKind::GatewayParallel => {}
        }
        out
    }

    /// Pools whose messages start the process containing `node`.
    fn starter_pools(&self, node: &str) -> BTreeSet<&'d str> {
        let d = self.d;
        let Some(pool) = d.pool_of(node) else {
            return BTreeSet::new();
        };
        pool.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::StartEventMessage)
            .flat_map(|n| d.incoming_messages(&n.id))
            .filter_map(|m| d.pool_of(&m.source).map(|p| p.id.as_str()))
            .collect()
    }
}
