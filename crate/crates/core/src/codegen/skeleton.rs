//! Block-structured view of the sequence flows inside one pool or
//! sub-process.

use std::collections::BTreeSet;

use crate::expr::Expr;
use crate::model::{Diagram, Node, NodeKind, SequenceFlow};

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Node(String),
    Seq(Vec<Block>),
    Parallel(Vec<Block>),
    /// Branches in evaluation order; the unguarded branch comes last.
    Choice {
        gateway: String,
        branches: Vec<(Option<Expr>, Block)>,
    },
}

struct Walker<'d> {
    d: &'d Diagram,
    scope: BTreeSet<&'d str>,
    visited: BTreeSet<String>,
    warnings: Vec<String>,
}

impl<'d> Walker<'d> {
    fn outgoing(&self, n: &str) -> Vec<&'d SequenceFlow> {
        let mut out: Vec<&SequenceFlow> = self.d.outgoing(n);
        // Guarded branches first, each group by id.
        out.sort_by_key(|f| (f.guard.is_none(), f.id.clone()));
        out
    }

    fn is_merge(&self, n: &str) -> bool {
        self.d.incoming(n).len() > 1
    }

    /// Walks forward from `start` until a merge node, an end, or a
    /// revisit. Returns the blocks and the merge node it stopped at.
    fn walk(&mut self, start: &str) -> (Vec<Block>, Option<String>) {
        let mut seq = Vec::new();
        let mut n = start.to_string();
        let mut first = true;
        loop {
            if !first && self.is_merge(&n) {
                return (seq, Some(n));
            }
            first = false;
            if !self.visited.insert(n.clone()) {
                self.warnings.push(format!("cycle through `{n}` flattened"));
                return (seq, None);
            }
            let node = self.d.node(&n).expect("flow targets exist");
            if !node.kind.is_gateway() {
                seq.push(Block::Node(n.clone()));
            }
            let outs = self.outgoing(&n);
            match outs.as_slice() {
                [] => return (seq, None),
                [only] => n = only.target.clone(),
                many => {
                    let mut branches = Vec::new();
                    let mut joins = BTreeSet::new();
                    for f in many {
                        let (b, stop) = self.walk(&f.target);
                        branches.push((f.guard.clone(), Block::Seq(b)));
                        joins.extend(stop);
                    }
                    if node.kind == NodeKind::GatewayExclusiveData {
                        seq.push(Block::Choice {
                            gateway: n.clone(),
                            branches,
                        });
                    } else {
                        seq.push(Block::Parallel(
                            branches.into_iter().map(|(_, b)| b).collect(),
                        ));
                    }
                    let mut joins = joins.into_iter();
                    match (joins.next(), joins.next()) {
                        (None, _) => return (seq, None),
                        (Some(j), None) => {
                            if self.visited.contains(&j) {
                                self.warnings.push(format!("cycle through `{j}` flattened"));
                                return (seq, None);
                            }
                            n = j;
                            first = true;
                        }
                        (Some(a), Some(b)) => {
                            self.warnings.push(format!(
                                "branches from `{}` do not rejoin at one node (`{a}`, `{b}`)",
                                n
                            ));
                            return (seq, None);
                        }
                    }
                }
            }
        }
    }
}

/// Structures `nodes` (one pool or one sub-process level). Nodes that do
/// not fit a nested block shape are appended in id order and reported.
pub fn structure(d: &Diagram, nodes: &[Node]) -> (Block, Vec<String>) {
    let mut w = Walker {
        d,
        scope: nodes.iter().map(|n| n.id.as_str()).collect(),
        visited: BTreeSet::new(),
        warnings: Vec::new(),
    };
    let mut entries: Vec<&Node> = nodes
        .iter()
        .filter(|n| d.incoming(&n.id).is_empty())
        .collect();
    entries.sort_by_key(|n| (!n.kind.is_start(), n.id.clone()));
    let mut threads = Vec::new();
    for e in entries {
        let (blocks, stop) = w.walk(&e.id);
        if let Some(m) = stop {
            // A merge reached from one entry thread; `walk` never stops at
            // its own start node, so this continues past it.
            if !w.visited.contains(&m) {
                let (more, _) = w.walk(&m);
                threads.push(Block::Seq(blocks.into_iter().chain(more).collect()));
                continue;
            }
        }
        threads.push(Block::Seq(blocks));
    }
    let mut rest: Vec<&str> = w
        .scope
        .iter()
        .copied()
        .filter(|id| !w.visited.contains(*id))
        .collect();
    rest.retain(|id| d.node(id).is_some_and(|n| !n.kind.is_gateway()));
    if !rest.is_empty() {
        w.warnings.push(format!(
            "unstructured nodes appended in id order: {}",
            rest.join(", ")
        ));
        threads.push(Block::Seq(
            rest.iter().map(|id| Block::Node(id.to_string())).collect(),
        ));
    }
    let block = match threads.len() {
        1 => threads.pop().expect("one thread"),
        _ => Block::Parallel(threads),
    };
    (block, w.warnings)
}

impl Block {
    /// Node ids in document order.
    pub fn node_ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Block::Node(id) => out.push(id),
            Block::Seq(bs) | Block::Parallel(bs) => bs.iter().for_each(|b| b.collect(out)),
            Block::Choice { branches, .. } => branches.iter().for_each(|(_, b)| b.collect(out)),
        }
    }
}
