//! Decision tree as JSON and as a DOT graph.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::algebra::Constraint;
use crate::engine::{EdgeKind, Outcome, Setup};

#[derive(Serialize)]
struct NodeOut {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    counter: Option<String>,
    value: Option<String>,
    lambda: Vec<String>,
    omega: Vec<String>,
    gamma: Vec<String>,
    constraints: Vec<String>,
    case: Option<usize>,
}

#[derive(Serialize)]
struct EdgeOut {
    from: usize,
    to: usize,
    kind: EdgeKind,
    constraints: Vec<String>,
    strategy: Option<String>,
}

#[derive(Serialize)]
struct CaseOut {
    index: usize,
    node: usize,
    constraints: Vec<String>,
    applied: Vec<String>,
    trail: String,
    witness: Option<BTreeMap<String, String>>,
}

#[derive(Serialize)]
struct TreeOut {
    height: usize,
    dead_ends: usize,
    nodes: Vec<NodeOut>,
    edges: Vec<EdgeOut>,
    cases: Vec<CaseOut>,
}

fn texts(cs: &[Constraint], order: &[String]) -> Vec<String> {
    cs.iter().map(|c| c.to_string_ordered(order)).collect()
}

pub fn tree_json(setup: &Setup, out: &Outcome) -> String {
    let order = setup.var_order();
    let t = &out.tree;
    let doc = TreeOut {
        height: t.height(),
        dead_ends: t.dead_ends,
        nodes: t
            .nodes
            .iter()
            .map(|n| NodeOut {
                id: n.id,
                parent: n.parent,
                depth: n.depth,
                counter: n.counter.clone(),
                value: n.value.as_ref().map(|v| v.to_string_ordered(&order)),
                lambda: n.state.lambda.clone(),
                omega: n.state.omega.clone(),
                gamma: n.state.gamma.iter().cloned().collect(),
                constraints: texts(n.state.c.constraints(), &order),
                case: n.case,
            })
            .collect(),
        edges: t
            .edges
            .iter()
            .map(|e| EdgeOut {
                from: e.from,
                to: e.to,
                kind: e.kind,
                constraints: texts(&e.constraints, &order),
                strategy: e.strategy.clone(),
            })
            .collect(),
        cases: out
            .cases
            .iter()
            .map(|c| CaseOut {
                index: c.index,
                node: c.node,
                constraints: texts(c.system.constraints(), &order),
                applied: c.applied.clone(),
                trail: c.trail.clone(),
                witness: c.witness.as_ref().map(|w| w.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("tree serializes");
    s.push('\n');
    s
}

fn quote(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Accept edges leave a node on its lower right, refuse edges on its
/// lower left.
pub fn tree_dot(setup: &Setup, out: &Outcome) -> String {
    let order = setup.var_order();
    let t = &out.tree;
    let mut s = String::from("digraph tree {\n  node [shape=box, fontname=\"monospace\"];\n");
    for n in &t.nodes {
        let label = match (&n.counter, &n.value, n.case) {
            (Some(id), Some(v), _) => format!("{id}\\n{}", quote(&v.to_string_ordered(&order))),
            (_, _, Some(i)) => format!("case {i}"),
            _ => "root".to_string(),
        };
        let shape = if n.case.is_some() { ", style=rounded" } else { "" };
        let _ = writeln!(s, "  n{} [label=\"{label}\"{shape}];", n.id);
    }
    for e in &t.edges {
        let mut label: Vec<String> = e.constraints.iter().map(|c| quote(&c.to_string_ordered(&order))).collect();
        if let Some(sid) = &e.strategy {
            label.push(format!("[{sid}]"));
        }
        let (port, style) = match e.kind {
            EdgeKind::Accept => ("se", "solid"),
            EdgeKind::Refuse => ("sw", "dashed"),
        };
        let _ = writeln!(
            s,
            "  n{} -> n{} [label=\"{}\", tailport={port}, style={style}];",
            e.from,
            e.to,
            label.join("\\n")
        );
    }
    s.push_str("}\n");
    s
}
