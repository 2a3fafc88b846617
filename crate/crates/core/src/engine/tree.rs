//! The labelled decision tree built by the search.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{split, EngineError, Quintuple, Setup};
use crate::algebra::{Constraint, Rat, Verdict};
use crate::counters::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Accept,
    Refuse,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub state: Quintuple,
    /// Counter popped at this node and its value, for inner nodes.
    pub counter: Option<String>,
    pub value: Option<Value>,
    /// Leaf position in depth-first order.
    pub case: Option<usize>,
    pub witness: Option<BTreeMap<String, Rat>>,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    pub constraints: Vec<Constraint>,
    /// Strategy applied on a refuse edge.
    pub strategy: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DecisionTree {
    /// Depth-first order, accept subtree before refuse subtree.
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Branches dropped because nothing below them survived.
    pub dead_ends: usize,
}

impl DecisionTree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Leaf node ids in case order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut v: Vec<(usize, usize)> = self.nodes.iter().filter_map(|n| n.case.map(|c| (c, n.id))).collect();
        v.sort();
        v.into_iter().map(|(_, n)| n).collect()
    }

    /// Longest root-to-node path, in edges.
    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == id)
    }

    pub fn child(&self, id: usize, kind: EdgeKind) -> Option<&Edge> {
        self.children(id).find(|e| e.kind == kind)
    }

    pub fn incoming(&self, id: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.to == id)
    }

    pub fn count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }
}

struct Sub {
    state: Quintuple,
    counter: Option<String>,
    value: Option<Value>,
    witness: Option<BTreeMap<String, Rat>>,
    children: Vec<(EdgeKind, Vec<Constraint>, Option<String>, Sub)>,
}

fn witness(v: Verdict) -> Option<BTreeMap<String, Rat>> {
    match v {
        Verdict::Consistent(w) => Some(w),
        _ => None,
    }
}

fn build(q: Quintuple, verdict: Verdict, setup: &Setup, dead: &mut usize) -> Result<Option<Sub>, EngineError> {
    if q.is_processed() {
        return Ok(Some(Sub {
            state: q,
            counter: None,
            value: None,
            witness: witness(verdict),
            children: Vec::new(),
        }));
    }
    let s = split(&q, setup)?;
    let mut children = Vec::new();
    if let Some((cs, a, v)) = s.accept {
        if let Some(sub) = build(a, v, setup, dead)? {
            children.push((EdgeKind::Accept, cs, None, sub));
        }
    }
    if let Some((cs, sid, r, v)) = s.refuse {
        if let Some(sub) = build(r, v, setup, dead)? {
            children.push((EdgeKind::Refuse, cs, Some(sid), sub));
        }
    }
    if children.is_empty() {
        *dead += 1;
        return Ok(None);
    }
    Ok(Some(Sub {
        state: q,
        counter: Some(s.counter),
        value: Some(s.value),
        witness: None,
        children,
    }))
}

fn flatten(sub: Sub, parent: Option<usize>, depth: usize, t: &mut DecisionTree, cases: &mut usize) -> usize {
    let id = t.nodes.len();
    let case = sub.children.is_empty().then(|| {
        *cases += 1;
        *cases - 1
    });
    t.nodes.push(Node {
        id,
        parent,
        depth,
        state: sub.state,
        counter: sub.counter,
        value: sub.value,
        case,
        witness: sub.witness,
    });
    for (kind, constraints, strategy, child) in sub.children {
        let to = flatten(child, Some(id), depth + 1, t, cases);
        t.edges.push(Edge { from: id, to, kind, constraints, strategy });
    }
    id
}

/// Grows the full tree below `q`, whose system has verdict `verdict`.
pub fn grow(q: Quintuple, verdict: Verdict, setup: &Setup) -> Result<DecisionTree, EngineError> {
    let mut t = DecisionTree { nodes: Vec::new(), edges: Vec::new(), dead_ends: 0 };
    let mut dead = 0;
    let root = if verdict.is_inconsistent() { None } else { build(q.clone(), verdict, setup, &mut dead)? };
    t.dead_ends = dead;
    match root {
        Some(sub) => {
            flatten(sub, None, 0, &mut t, &mut 0);
        }
        None => t.nodes.push(Node {
            id: 0,
            parent: None,
            depth: 0,
            state: q,
            counter: None,
            value: None,
            case: None,
            witness: None,
        }),
    }
    t.edges.sort_by_key(|e| e.to);
    Ok(t)
}
