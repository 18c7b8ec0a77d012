use std::collections::{BTreeMap, BTreeSet};

use super::xml::Element;
use super::{check, CodegenError, Output};
use crate::model::{
    DataMapping, DataObject, DataStore, Diagram, Node, NodeKind, Pool, StoreScope, VarType,
    Variable,
};

const NAMESPACE: &str = "http://www.wfmc.org/2009/XPDL2.2";

fn basic_type(t: VarType) -> Option<&'static str> {
    match t {
        VarType::String => Some("STRING"),
        VarType::Number => Some("FLOAT"),
        VarType::Boolean => Some("BOOLEAN"),
        VarType::Record => None,
    }
}

/// Variables with record-typed parents replaced by their dotted leaves.
fn leaves(vars: &[Variable]) -> Vec<&Variable> {
    vars.iter()
        .filter(|v| {
            v.vtype != VarType::Record || {
                let prefix = format!("{}.", v.name);
                !vars.iter().any(|w| w.name.starts_with(&prefix))
            }
        })
        .collect()
}

fn data_type(t: VarType) -> Element {
    match basic_type(t) {
        Some(b) => Element::new("DataType").child(Element::new("BasicType").attr("Type", b)),
        None => Element::new("DataType").child(Element::new("SchemaType")),
    }
}

fn last_segment(path: &str) -> &str {
    path.rsplit('.').next().unwrap_or(path)
}

fn store_fields(s: &DataStore) -> Vec<Element> {
    let mut out = Vec::new();
    for e in &s.entities {
        for f in leaves(&e.fields) {
            out.push(
                Element::new("DataField")
                    .attr("Id", format!("{}.{}.{}", s.id, e.name, f.name))
                    .attr("Name", last_segment(&f.name))
                    .child(data_type(f.vtype)),
            );
        }
    }
    out
}

/// Dotted paths an object exposes as parameters.
fn parameters(o: &DataObject) -> Vec<String> {
    let vars = leaves(&o.variables);
    if vars.is_empty() {
        return vec![o.id.clone()];
    }
    vars.iter()
        .map(|v| format!("{}.{}", o.id, v.name))
        .collect()
}

fn data_object(d: &Diagram, o: &DataObject) -> Element {
    let mut e = Element::new("DataObject")
        .attr("id", o.id.as_str())
        .attr("Name", o.name.as_str())
        .attr_opt("State", o.state.as_deref())
        .attr_opt("Url", o.url.as_deref());
    let origin = o.origin_store.as_deref().and_then(|s| d.store(s));
    let mut fields = Element::new("DataFields");
    for v in leaves(&o.variables) {
        let reference = origin
            .filter(|s| s.field(&v.name).is_some())
            .map(|s| format!("{}.{}", s.id, v.name));
        fields.push(
            Element::new("DataField")
                .attr("id", v.name.as_str())
                .attr("Name", last_segment(&v.name))
                .attr_opt("Ref", reference)
                .child(data_type(v.vtype)),
        );
    }
    e.push_nonempty(fields);
    e
}

fn assignments(ms: &[&DataMapping]) -> Element {
    let mut a = Element::new("Assignments");
    for m in ms {
        for r in &m.rules {
            a.push(
                Element::new("Assignment")
                    .child(Element::new("Target").text(r.to.as_str()))
                    .child(Element::new("Expression").text(r.from.to_string())),
            );
        }
    }
    a
}

struct Gen<'d> {
    d: &'d Diagram,
    /// Mappings attached to their first consuming node.
    by_node: BTreeMap<&'d str, Vec<&'d DataMapping>>,
}

pub fn to_xpdl(d: &Diagram) -> Result<Output, CodegenError> {
    check(d)?;
    let id = d.id().unwrap_or("package");
    let mut pkg = Element::new("Package")
        .attr("xmlns", NAMESPACE)
        .attr("Id", id)
        .attr("Name", id);
    pkg.push(
        Element::new("PackageHeader")
            .child(Element::new("XPDLVersion").text("2.2"))
            .child(Element::new("Vendor").text("bpdmn")),
    );

    let mut pools = Element::new("Pools");
    for p in d.pools() {
        pools.push(
            Element::new("Pool")
                .attr("Id", p.id.as_str())
                .attr("Name", p.name.as_str())
                .attr_opt("Process", (!p.external).then_some(p.id.as_str()))
                .attr("BoundaryVisible", "true"),
        );
    }
    pkg.push_nonempty(pools);

    let mut stores: Vec<&DataStore> = d.stores().iter().collect();
    stores.sort_by(|a, b| a.id.cmp(&b.id));
    let mut fields = Element::new("DataFields");
    for s in stores.iter().filter(|s| s.scope == StoreScope::Diagram) {
        store_fields(s).into_iter().for_each(|f| fields.push(f));
    }
    pkg.push_nonempty(fields);

    let mut ds = Element::new("DataStores");
    for s in &stores {
        ds.push(
            Element::new("DataStore")
                .attr("Id", s.id.as_str())
                .attr("Name", s.name.as_str()),
        );
    }
    pkg.push_nonempty(ds);

    let mut apps = Element::new("Applications");
    let mut tasks: Vec<&Node> = d.nodes().filter(|n| n.kind == NodeKind::Task).collect();
    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    for t in tasks {
        let mut app = Element::new("Application")
            .attr("Id", format!("app.{}", t.id))
            .attr("Name", t.name.as_str());
        app.comment("placeholder; implementation details are not modelled");
        apps.push(app);
    }
    pkg.push_nonempty(apps);

    let mut flows = Element::new("MessageFlows");
    let mut mfs: Vec<_> = d.message_flows().iter().collect();
    mfs.sort_by(|a, b| a.id.cmp(&b.id));
    for m in mfs {
        let mut mf = Element::new("MessageFlow")
            .attr("Id", m.id.as_str())
            .attr("Source", m.source.as_str())
            .attr("Target", m.target.as_str());
        // One message per carried object, whatever its directions.
        let carried: BTreeSet<&str> = m.attachments.iter().map(|a| a.object.as_str()).collect();
        for obj in carried {
            let Some(o) = d.object(obj) else { continue };
            let mut params = Element::new("ActualParameters");
            for p in parameters(o) {
                params.push(Element::new("ActualParameter").text(p));
            }
            mf.push(
                Element::new("Message")
                    .attr("Id", format!("{}.{}", m.id, o.id))
                    .attr("Name", o.id.as_str())
                    .child(params),
            );
        }
        flows.push(mf);
    }
    pkg.push_nonempty(flows);

    let mut artifacts = Element::new("Artifacts");
    let mut objects: Vec<&DataObject> = d.objects().iter().collect();
    objects.sort_by(|a, b| a.id.cmp(&b.id));
    for o in objects {
        artifacts.push(
            Element::new("Artifact")
                .attr("Id", o.id.as_str())
                .attr("ArtifactType", "DataObject")
                .child(data_object(d, o)),
        );
    }
    pkg.push_nonempty(artifacts);

    let mut g = Gen {
        d,
        by_node: BTreeMap::new(),
    };
    let mut orphans: Vec<&DataMapping> = Vec::new();
    for m in d.mappings() {
        let consumer = d
            .node_ids()
            .iter()
            .find(|n| d.inputs_of(n).iter().any(|i| i.object == m.target_object));
        match consumer {
            Some(n) => g.by_node.entry(n.as_str()).or_default().push(m),
            None => orphans.push(m),
        }
    }

    let mut procs = Element::new("WorkflowProcesses");
    let internal: Vec<&Pool> = d.pools().iter().filter(|p| !p.external).collect();
    for (i, p) in internal.iter().enumerate() {
        let mut wp = g.process(p);
        // Mappings no node consumes live on the first process.
        if i == 0 && !orphans.is_empty() {
            wp.push(assignments(&orphans));
            orphans.clear();
        }
        procs.push(wp);
    }
    pkg.push_nonempty(procs);
    if !orphans.is_empty() {
        pkg.push(assignments(&orphans));
    }
    Ok(Output {
        text: pkg.to_document(),
        warnings: Vec::new(),
    })
}

impl<'d> Gen<'d> {
    fn process(&self, p: &'d Pool) -> Element {
        let mut wp = Element::new("WorkflowProcess")
            .attr("Id", p.id.as_str())
            .attr("Name", p.name.as_str());
        let mut sets = Element::new("ActivitySets");
        let mut stack: Vec<&Node> = p.nodes.iter().collect();
        let mut sub_processes = Vec::new();
        while let Some(n) = stack.pop() {
            if n.kind == NodeKind::SubProcess {
                sub_processes.push(n);
            }
            stack.extend(n.children.iter());
        }
        sub_processes.sort_by(|a, b| a.id.cmp(&b.id));
        for sp in sub_processes {
            let mut set = Element::new("ActivitySet")
                .attr("Id", sp.id.as_str())
                .attr("Name", sp.name.as_str());
            let mut fields = Element::new("DataFields");
            let mut scoped: Vec<&DataStore> = self
                .d
                .stores()
                .iter()
                .filter(|s| s.scope == StoreScope::SubProcess(sp.id.clone()))
                .collect();
            scoped.sort_by(|a, b| a.id.cmp(&b.id));
            for s in scoped {
                store_fields(s).into_iter().for_each(|f| fields.push(f));
            }
            set.push_nonempty(fields);
            self.level(&mut set, &sp.children, Some(&sp.id), p);
            sets.push(set);
        }
        wp.push_nonempty(sets);
        self.level(&mut wp, &p.nodes, None, p);
        wp
    }

    /// Activities and transitions of one nesting level.
    fn level(&self, parent: &mut Element, nodes: &[Node], owner: Option<&str>, pool: &Pool) {
        let mut acts = Element::new("Activities");
        let mut sorted: Vec<&Node> = nodes.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        for n in sorted {
            acts.push(self.activity(n));
        }
        parent.push_nonempty(acts);

        let mut trans = Element::new("Transitions");
        let mut flows: Vec<_> = pool
            .sequence_flows
            .iter()
            .filter(|f| self.d.parent_of(&f.source) == owner)
            .collect();
        flows.sort_by(|a, b| a.id.cmp(&b.id));
        for f in flows {
            let from_xor = self
                .d
                .node(&f.source)
                .is_some_and(|n| n.kind == NodeKind::GatewayExclusiveData);
            let mut t = Element::new("Transition")
                .attr("Id", f.id.as_str())
                .attr("From", f.source.as_str())
                .attr("To", f.target.as_str());
            match &f.guard {
                Some(g) => t.push(
                    Element::new("Condition")
                        .attr("Type", "CONDITION")
                        .child(Element::new("Expression").text(g.to_string())),
                ),
                None if from_xor => t.push(Element::new("Condition").attr("Type", "OTHERWISE")),
                None => {}
            }
            trans.push(t);
        }
        parent.push_nonempty(trans);
    }

    fn activity(&self, n: &Node) -> Element {
        let d = self.d;
        let mut a = Element::new("Activity")
            .attr("Id", n.id.as_str())
            .attr("name", n.name.as_str());
        let ins: BTreeSet<String> = d.inputs_of(&n.id).into_iter().map(|i| i.object).collect();
        let outs: BTreeSet<String> = d.outputs_of(&n.id).into_iter().map(|o| o.object).collect();
        if !ins.is_empty() {
            let mut set = Element::new("InputSet");
            for o in &ins {
                set.push(Element::new("Input").attr("ArtifactId", o.as_str()));
            }
            a.push(Element::new("InputSets").child(set));
        }
        if !outs.is_empty() {
            let mut set = Element::new("OutputSet");
            for o in &outs {
                set.push(Element::new("Output").attr("ArtifactId", o.as_str()));
            }
            a.push(Element::new("OutputSets").child(set));
        }
        match n.kind {
            NodeKind::Task => {
                let mut params = Element::new("ActualParameters");
                let mut seen = BTreeSet::new();
                for obj in ins.iter().chain(&outs) {
                    let Some(o) = d.object(obj) else { continue };
                    for p in parameters(o) {
                        if seen.insert(p.clone()) {
                            params.push(Element::new("ActualParameter").text(p));
                        }
                    }
                }
                let mut app = Element::new("TaskApplication").attr("Id", format!("app.{}", n.id));
                app.push_nonempty(params);
                a.push(Element::new("Implementation").child(Element::new("Task").child(app)));
                if n.multi_instance {
                    a.push(Element::new("Loop").attr("LoopType", "MultiInstance"));
                }
            }
            NodeKind::SubProcess => {
                a.push(Element::new("BlockActivity").attr("ActivitySetId", n.id.as_str()));
            }
            NodeKind::StartEventNone | NodeKind::StartEventMessage => {
                let trigger = if n.kind == NodeKind::StartEventMessage {
                    "Message"
                } else {
                    "None"
                };
                a.push(
                    Element::new("Event")
                        .child(Element::new("StartEvent").attr("Trigger", trigger)),
                );
            }
            NodeKind::EndEvent => {
                let result = if d.outgoing_messages(&n.id).is_empty() {
                    "None"
                } else {
                    "Message"
                };
                a.push(
                    Element::new("Event").child(Element::new("EndEvent").attr("Result", result)),
                );
            }
            NodeKind::IntermediateMessage => {
                a.push(
                    Element::new("Event")
                        .child(Element::new("IntermediateEvent").attr("Trigger", "Message")),
                );
            }
            NodeKind::GatewayExclusiveData => {
                let mut route = Element::new("Route").attr("GatewayType", "Exclusive");
                if let Some(c) = &n.condition {
                    route = route.attr("Condition", c.to_string());
                }
                a.push(route);
            }
            NodeKind::GatewayParallel => {
                a.push(Element::new("Route").attr("GatewayType", "Parallel"));
            }
        }
        if let Some(ms) = self.by_node.get(n.id.as_str()) {
            a.push(assignments(ms));
        }
        a
    }
}
