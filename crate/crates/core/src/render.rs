//! Graphviz `dot` output.

use std::fmt::Write;

use crate::model::{Diagram, Direction, Node, NodeKind, StoreIcon};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Drop data object nodes and mapping edges.
    pub hide_data: bool,
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if c.is_control() => out.push(' '),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn label(id: &str, name: &str) -> String {
    quote(if name.is_empty() { id } else { name })
}

fn node_attrs(n: &Node) -> String {
    let l = label(&n.id, &n.name);
    match n.kind {
        NodeKind::Task if n.multi_instance => {
            format!("shape=box, style=\"rounded,bold\", peripheries=2, label={l}")
        }
        NodeKind::Task => format!("shape=box, style=rounded, label={l}"),
        NodeKind::SubProcess => format!("shape=box, style=\"rounded,bold\", label={l}"),
        NodeKind::GatewayExclusiveData => format!("shape=diamond, label=\"X\", xlabel={l}"),
        NodeKind::GatewayParallel => format!("shape=diamond, label=\"+\", xlabel={l}"),
        NodeKind::StartEventNone => format!("shape=circle, label=\"\", xlabel={l}"),
        NodeKind::StartEventMessage => format!("shape=circle, label=\"M\", xlabel={l}"),
        NodeKind::IntermediateMessage => {
            format!("shape=doublecircle, label=\"M\", xlabel={l}")
        }
        NodeKind::EndEvent => format!("shape=circle, penwidth=3, label=\"\", xlabel={l}"),
    }
}

fn write_nodes(out: &mut String, nodes: &[Node], depth: usize) {
    let pad = "  ".repeat(depth);
    for n in nodes {
        let _ = writeln!(out, "{pad}{} [{}];", quote(&n.id), node_attrs(n));
        if !n.children.is_empty() {
            let _ = writeln!(
                out,
                "{pad}subgraph {} {{",
                quote(&format!("cluster_{}", n.id))
            );
            let _ = writeln!(
                out,
                "{pad}  label={}; style=rounded;",
                label(&n.id, &n.name)
            );
            write_nodes(out, &n.children, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

pub fn to_dot(d: &Diagram, opts: RenderOptions) -> String {
    let name = d.id().unwrap_or("bpdmn");
    let mut out = format!("digraph {} {{\n", quote(name));
    if d.is_empty() {
        out.push_str("}\n");
        return out;
    }
    out.push_str("  rankdir=LR;\n  node [fontsize=10];\n");

    for p in d.pools() {
        if p.external {
            let _ = writeln!(
                out,
                "  {} [shape=box, style=filled, fillcolor=lightgrey, label={}];",
                quote(&p.id),
                label(&p.id, &p.name)
            );
            continue;
        }
        let _ = writeln!(out, "  subgraph {} {{", quote(&format!("cluster_{}", p.id)));
        let _ = writeln!(out, "    label={};", label(&p.id, &p.name));
        write_nodes(&mut out, &p.nodes, 2);
        out.push_str("  }\n");
    }

    for s in d.stores() {
        let shape = match s.icon {
            StoreIcon::Database | StoreIcon::Custom(_) => "cylinder",
            StoreIcon::Warehouse => "box3d",
            StoreIcon::Folder => "folder",
        };
        let _ = writeln!(
            out,
            "  {} [shape={shape}, label={}];",
            quote(&s.id),
            label(&s.id, &s.name)
        );
    }

    if !opts.hide_data {
        for o in d.objects() {
            let _ = writeln!(
                out,
                "  {} [shape=note, label={}];",
                quote(&o.id),
                label(&o.id, &o.name)
            );
        }
    }

    for f in d.sequence_flows() {
        let guard = f
            .guard
            .as_ref()
            .map(|g| format!(", label={}", quote(&g.to_string())))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "  {} -> {} [id={}{guard}];",
            quote(&f.source),
            quote(&f.target),
            quote(&f.id)
        );
        if !opts.hide_data {
            for a in &f.attachments {
                let (from, to) = match a.direction {
                    Direction::Output => (&f.source, &a.object),
                    Direction::Input => (&a.object, &f.target),
                };
                let _ = writeln!(
                    out,
                    "  {} -> {} [style=dotted, arrowhead=none];",
                    quote(from),
                    quote(to)
                );
            }
        }
    }

    for m in d.message_flows() {
        let _ = writeln!(
            out,
            "  {} -> {} [id={}, style=dashed, arrowhead=empty];",
            quote(&m.source),
            quote(&m.target),
            quote(&m.id)
        );
        if !opts.hide_data {
            for a in &m.attachments {
                let (from, to) = match a.direction {
                    Direction::Output => (&m.source, &a.object),
                    Direction::Input => (&a.object, &m.target),
                };
                let _ = writeln!(
                    out,
                    "  {} -> {} [style=dotted, arrowhead=none];",
                    quote(from),
                    quote(to)
                );
            }
        }
    }

    for f in d.data_flows() {
        let _ = writeln!(
            out,
            "  {} -> {} [id={}, style=dashed, label={}];",
            quote(&f.source),
            quote(&f.target),
            quote(&f.id),
            quote(&f.object)
        );
    }

    if !opts.hide_data {
        for m in d.mappings() {
            let _ = writeln!(
                out,
                "  {} -> {} [style=dotted, label={}];",
                quote(&m.source_object),
                quote(&m.target_object),
                quote(&m.id)
            );
        }
    }
    out.push_str("}\n");
    out
}
