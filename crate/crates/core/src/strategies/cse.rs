//! Common subexpression elimination on the thread body.
//!
//! Level 0 works on straight-line runs of statements: a pure subexpression
//! computed at least twice is bound once to a fresh temporary declared just
//! before its first use. Sums and products are compared as multisets of
//! operands, so `p + 1` is found inside `N + p + 1`. Level 1 also hoists a
//! subexpression that both arms of an `if`/`else` compute in front of the
//! `if`.

use std::cell::RefCell;
use std::collections::BTreeSet;

use super::StrategyError;
use crate::dsl::{BinOp, Expr, LValue, Stmt, StmtKind};
use crate::model::SourceCfg;

/// Chains longer than this only offer pairs and the whole chain.
const MAX_SUBSET_TERMS: usize = 6;

pub fn apply_cse(g: &SourceCfg, level: u8) -> Result<SourceCfg, StrategyError> {
    let names = RefCell::new(Namer::new(g.program()));
    let p = g.program().map_schedule(|cache, body| {
        let body = rewrite_stmt(body, level, &mut names.borrow_mut());
        (cache.to_vec(), body)
    });
    Ok(g.with_program(p)?)
}

#[derive(Debug)]
struct Namer {
    taken: BTreeSet<String>,
    next: usize,
}

impl Namer {
    fn new(p: &crate::dsl::Program) -> Namer {
        let mut taken = BTreeSet::new();
        for item in &p.items {
            item.walk(&mut |s| {
                match &s.kind {
                    StmtKind::Decl { name, .. } => {
                        taken.insert(name.clone());
                    }
                    StmtKind::For { var, .. } | StmtKind::MetaFor { var, .. } => {
                        taken.insert(var.clone());
                    }
                    _ => {}
                }
                for e in stmt_exprs(s) {
                    e.visit_vars(&mut |v| {
                        taken.insert(v.to_string());
                    });
                }
            });
        }
        Namer { taken, next: 0 }
    }

    fn fresh(&mut self) -> String {
        loop {
            let n = format!("t{}", self.next);
            self.next += 1;
            if self.taken.insert(n.clone()) {
                return n;
            }
        }
    }
}

fn stmt_exprs(s: &Stmt) -> Vec<&Expr> {
    match &s.kind {
        StmtKind::Decl { dims, init, .. } => dims.iter().chain(init.iter()).collect(),
        StmtKind::Assign { target, value, .. } => {
            let mut v: Vec<&Expr> = match target {
                LValue::Var(_) => Vec::new(),
                LValue::Index { indices, .. } => indices.iter().collect(),
            };
            v.push(value);
            v
        }
        StmtKind::For { init, bound, .. } => vec![init, bound],
        StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => vec![cond],
        StmtKind::MetaFor { bound, .. } => vec![bound],
        StmtKind::Assert(e) => vec![e],
        StmtKind::MetaSchedule { .. } | StmtKind::Block(_) => Vec::new(),
    }
}

fn rewrite_stmt(s: &Stmt, level: u8, names: &mut Namer) -> Stmt {
    let kind = match &s.kind {
        StmtKind::Block(stmts) => StmtKind::Block(rewrite_list(stmts, level, names)),
        StmtKind::For { var, init, bound, body } => StmtKind::For {
            var: var.clone(),
            init: init.clone(),
            bound: bound.clone(),
            body: Box::new(rewrite_stmt(body, level, names)),
        },
        StmtKind::While { cond, body } => StmtKind::While {
            cond: cond.clone(),
            body: Box::new(rewrite_stmt(body, level, names)),
        },
        StmtKind::MetaFor { var, bound, role, body } => StmtKind::MetaFor {
            var: var.clone(),
            bound: bound.clone(),
            role: *role,
            body: Box::new(rewrite_stmt(body, level, names)),
        },
        StmtKind::If { cond, then, els } => StmtKind::If {
            cond: cond.clone(),
            then: Box::new(rewrite_stmt(then, level, names)),
            els: els.as_ref().map(|e| Box::new(rewrite_stmt(e, level, names))),
        },
        k => k.clone(),
    };
    Stmt { kind, span: s.span }
}

fn is_simple(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Decl { dims, .. } => dims.is_empty(),
        StmtKind::Assign { .. } | StmtKind::Assert(_) => true,
        _ => false,
    }
}

fn rewrite_list(stmts: &[Stmt], level: u8, names: &mut Namer) -> Vec<Stmt> {
    let mut out: Vec<Stmt> = Vec::new();
    for s in stmts {
        let s = rewrite_stmt(s, level, names);
        if level >= 1 {
            if let Some((hoisted, s)) = hoist_from_if(&s, names) {
                out.extend(hoisted);
                out.push(s);
                continue;
            }
        }
        out.push(s);
    }
    // Straight-line runs, now including any hoisted temporaries.
    let mut result = Vec::new();
    let mut run = Vec::new();
    for s in out {
        if is_simple(&s) {
            run.push(s);
        } else {
            result.extend(cse_run(std::mem::take(&mut run), names));
            result.push(s);
        }
    }
    result.extend(cse_run(run, names));
    result
}

/// A candidate subexpression: a sub-multiset of a sum or product chain, or
/// any other non-leaf pure node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Cand {
    Chain(BinOp, Vec<Expr>),
    Whole(Expr),
}

impl Cand {
    fn expr(&self, order_hint: &[Expr]) -> Expr {
        match self {
            Cand::Whole(e) => e.clone(),
            Cand::Chain(op, terms) => {
                // Keep the operand order of the first occurrence.
                let mut left: Vec<Expr> = terms.clone();
                let mut ordered = Vec::new();
                for t in order_hint {
                    if let Some(i) = left.iter().position(|x| x == t) {
                        ordered.push(left.remove(i));
                    }
                }
                ordered.extend(left);
                build_chain(*op, ordered)
            }
        }
    }

    fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut add = |e: &Expr| {
            e.visit_vars(&mut |v| {
                out.insert(v.to_string());
            })
        };
        match self {
            Cand::Whole(e) => add(e),
            Cand::Chain(_, ts) => ts.iter().for_each(&mut add),
        }
        out
    }
}

fn is_chain_op(op: BinOp) -> bool {
    matches!(op, BinOp::Add | BinOp::Mul)
}

fn flatten(op: BinOp, e: &Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Binary(o, a, b) if *o == op => {
            flatten(op, a, out);
            flatten(op, b, out);
        }
        _ => out.push(e.clone()),
    }
}

fn build_chain(op: BinOp, terms: Vec<Expr>) -> Expr {
    let mut it = terms.into_iter();
    let first = it.next().expect("chains have at least one term");
    it.fold(first, |acc, t| Expr::bin(op, acc, t))
}

/// Candidates offered by `e`, each with the operand order it appears in.
fn candidates(e: &Expr, out: &mut Vec<(Cand, Vec<Expr>)>) {
    match e {
        Expr::Int(_) | Expr::Var(_) => {}
        Expr::Index { indices, .. } => indices.iter().for_each(|i| candidates(i, out)),
        Expr::Unary(_, a) => {
            if e.is_pure() {
                out.push((Cand::Whole(e.clone()), Vec::new()));
            }
            candidates(a, out);
        }
        Expr::Binary(op, _, _) if is_chain_op(*op) => {
            let mut terms = Vec::new();
            flatten(*op, e, &mut terms);
            let pure: Vec<usize> = (0..terms.len()).filter(|&i| terms[i].is_pure()).collect();
            let mut seen = BTreeSet::new();
            for subset in subsets(&pure) {
                let mut key: Vec<Expr> = subset.iter().map(|&i| terms[i].clone()).collect();
                let hint = key.clone();
                key.sort();
                if seen.insert(key.clone()) {
                    out.push((Cand::Chain(*op, key), hint));
                }
            }
            terms.iter().for_each(|t| candidates(t, out));
        }
        Expr::Binary(_, a, b) => {
            if e.is_pure() {
                out.push((Cand::Whole(e.clone()), Vec::new()));
            }
            candidates(a, out);
            candidates(b, out);
        }
    }
}

fn subsets(idx: &[usize]) -> Vec<Vec<usize>> {
    let n = idx.len();
    if n < 2 {
        return Vec::new();
    }
    if n > MAX_SUBSET_TERMS {
        let mut v = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                v.push(vec![idx[i], idx[j]]);
            }
        }
        v.push(idx.to_vec());
        return v;
    }
    (1u32..1 << n)
        .filter(|m| m.count_ones() >= 2)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| idx[i]).collect())
        .collect()
}

fn multiset_remove(terms: &[Expr], sub: &[Expr]) -> Option<(Vec<Expr>, usize)> {
    let mut rest = terms.to_vec();
    let mut first = usize::MAX;
    for t in sub {
        let i = rest.iter().position(|x| x == t)?;
        // Position within the original chain, for placing the temporary.
        let removed_before = terms.len() - rest.len();
        first = first.min(i + removed_before);
        rest.remove(i);
    }
    Some((rest, first))
}

/// Replaces every occurrence of `c` in `e` by `t`; returns the count.
fn replace(e: &Expr, c: &Cand, t: &str) -> (Expr, usize) {
    match (e, c) {
        (_, Cand::Whole(w)) if e == w => (Expr::var(t), 1),
        (Expr::Binary(op, _, _), Cand::Chain(cop, sub)) if op == cop => {
            let mut terms = Vec::new();
            flatten(*op, e, &mut terms);
            if let Some((rest, at)) = multiset_remove(&terms, sub) {
                let mut n = 1;
                let mut rebuilt: Vec<Expr> = rest
                    .iter()
                    .map(|x| {
                        let (x, k) = replace(x, c, t);
                        n += k;
                        x
                    })
                    .collect();
                rebuilt.insert(at.min(rebuilt.len()), Expr::var(t));
                (build_chain(*op, rebuilt), n)
            } else {
                replace_children(e, c, t)
            }
        }
        _ => replace_children(e, c, t),
    }
}

fn replace_children(e: &Expr, c: &Cand, t: &str) -> (Expr, usize) {
    match e {
        Expr::Int(_) | Expr::Var(_) => (e.clone(), 0),
        Expr::Index { array, indices } => {
            let mut n = 0;
            let indices = indices
                .iter()
                .map(|i| {
                    let (i, k) = replace(i, c, t);
                    n += k;
                    i
                })
                .collect();
            (Expr::Index { array: array.clone(), indices }, n)
        }
        Expr::Unary(op, a) => {
            let (a, n) = replace(a, c, t);
            (Expr::Unary(*op, Box::new(a)), n)
        }
        Expr::Binary(op, a, b) => {
            let (a, n) = replace(a, c, t);
            let (b, m) = replace(b, c, t);
            (Expr::bin(*op, a, b), n + m)
        }
    }
}

fn map_stmt_exprs(s: &Stmt, f: &mut impl FnMut(&Expr) -> Expr) -> Stmt {
    let kind = match &s.kind {
        StmtKind::Decl { is_const, name, dims, init } => StmtKind::Decl {
            is_const: *is_const,
            name: name.clone(),
            dims: dims.clone(),
            init: init.as_ref().map(&mut *f),
        },
        StmtKind::Assign { target, op, value } => {
            let target = match target {
                LValue::Var(v) => LValue::Var(v.clone()),
                LValue::Index { array, indices } => LValue::Index {
                    array: array.clone(),
                    indices: indices.iter().map(&mut *f).collect(),
                },
            };
            StmtKind::Assign { target, op: *op, value: f(value) }
        }
        StmtKind::Assert(e) => StmtKind::Assert(f(e)),
        k => k.clone(),
    };
    Stmt { kind, span: s.span }
}

fn assigned_var(s: &Stmt) -> Option<&str> {
    match &s.kind {
        StmtKind::Decl { name, .. } => Some(name),
        StmtKind::Assign { target: LValue::Var(v), .. } => Some(v),
        _ => None,
    }
}

fn stmt_candidates(s: &Stmt) -> Vec<(Cand, Vec<Expr>)> {
    let mut out = Vec::new();
    for e in stmt_exprs(s) {
        candidates(e, &mut out);
    }
    out
}

/// Level-0 elimination on one straight-line run.
fn cse_run(mut run: Vec<Stmt>, names: &mut Namer) -> Vec<Stmt> {
    loop {
        let Some((c, hint, first, last)) = best_candidate(&run) else {
            return run;
        };
        let t = names.fresh();
        let value = c.expr(&hint);
        for s in &mut run[first..=last] {
            *s = map_stmt_exprs(s, &mut |e| replace(e, &c, &t).0);
        }
        run.insert(first, decl(&t, value));
    }
}

fn decl(name: &str, value: Expr) -> Stmt {
    Stmt::new(StmtKind::Decl {
        is_const: false,
        name: name.to_string(),
        dims: Vec::new(),
        init: Some(value),
    })
}

/// Picks the largest candidate occurring at least twice, ties broken by
/// earliest first occurrence. Returns it with the statement window it may
/// be shared across.
fn best_candidate(run: &[Stmt]) -> Option<(Cand, Vec<Expr>, usize, usize)> {
    let per_stmt: Vec<Vec<(Cand, Vec<Expr>)>> = run.iter().map(stmt_candidates).collect();
    let mut best: Option<(usize, Cand, Vec<Expr>, usize, usize)> = None;
    let mut tried = BTreeSet::new();
    for (i, cands) in per_stmt.iter().enumerate() {
        for (c, hint) in cands {
            if !tried.insert(c.clone()) {
                continue;
            }
            let vars = c.vars();
            let mut count = 0;
            let mut last = i;
            for (j, s) in run.iter().enumerate().skip(i) {
                count += per_stmt[j].iter().filter(|(d, _)| d == c).count();
                last = j;
                if assigned_var(s).is_some_and(|v| vars.contains(v)) {
                    break;
                }
            }
            if count < 2 {
                continue;
            }
            let size = c.expr(hint).size();
            if best.as_ref().is_none_or(|b| size > b.0) {
                best = Some((size, c.clone(), hint.clone(), i, last));
            }
        }
    }
    best.map(|(_, c, h, f, l)| (c, h, f, l))
}

/// Leading simple statements of a branch, the ones that always execute.
fn leading_run(s: &Stmt) -> &[Stmt] {
    match &s.kind {
        StmtKind::Block(stmts) => {
            let n = stmts.iter().take_while(|s| is_simple(s)).count();
            &stmts[..n]
        }
        _ if is_simple(s) => std::slice::from_ref(s),
        _ => &[],
    }
}

fn assigns_any(s: &Stmt, vars: &BTreeSet<String>) -> bool {
    let mut hit = false;
    s.walk(&mut |s| {
        if let Some(v) = assigned_var(s) {
            hit |= vars.contains(v);
        }
        if let StmtKind::For { var, .. } = &s.kind {
            hit |= vars.contains(var);
        }
    });
    hit
}

/// Level 1: temporaries for subexpressions both arms compute unconditionally.
fn hoist_from_if(s: &Stmt, names: &mut Namer) -> Option<(Vec<Stmt>, Stmt)> {
    let StmtKind::If { cond, then, els: Some(els) } = &s.kind else {
        return None;
    };
    let (mut then, mut els) = (then.as_ref().clone(), els.as_ref().clone());
    let mut hoisted = Vec::new();
    loop {
        let a: Vec<(Cand, Vec<Expr>)> = leading_run(&then).iter().flat_map(stmt_candidates).collect();
        let b: BTreeSet<Cand> = leading_run(&els).iter().flat_map(stmt_candidates).map(|c| c.0).collect();
        let pick = a
            .into_iter()
            .filter(|(c, _)| b.contains(c))
            .filter(|(c, _)| {
                let vars = c.vars();
                !assigns_any(&then, &vars) && !assigns_any(&els, &vars)
            })
            .fold(None, |best: Option<(Cand, Vec<Expr>)>, (c, h)| match best {
                Some(b) if b.0.expr(&b.1).size() >= c.expr(&h).size() => Some(b),
                _ => Some((c, h)),
            });
        let Some((c, hint)) = pick else { break };
        let t = names.fresh();
        hoisted.push(decl(&t, c.expr(&hint)));
        let sub = |st: &Stmt| st.map(&mut |x| map_stmt_exprs(&x, &mut |e| replace(e, &c, &t).0));
        then = sub(&then);
        els = sub(&els);
    }
    if hoisted.is_empty() {
        return None;
    }
    let s = Stmt {
        kind: StmtKind::If { cond: cond.clone(), then: Box::new(then), els: Some(Box::new(els)) },
        span: s.span,
    };
    Some((hoisted, s))
}
