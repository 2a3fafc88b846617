//! Thread granularity reduction: a serial loop `for (k = 0; k < s; ++k)` in
//! the thread body, with `s` a program parameter or a constant, is removed
//! and `s` is replaced by one throughout the compile unit.

use super::{inapplicable, StrategyError};
use std::cell::Cell;

use crate::dsl::{simplify, Expr, LValue, Program, Stmt, StmtKind};
use crate::model::SourceCfg;

const ID: &str = "granularity";

/// The granularity loop's index and its bound's name.
pub fn find_granularity_loop(g: &SourceCfg) -> Option<(String, String)> {
    let t = g.params();
    let mut found = None;
    g.nest().body.walk(&mut |s| {
        if found.is_some() {
            return;
        }
        if let StmtKind::For { var, init: Expr::Int(0), bound: Expr::Var(b), body } = &s.kind {
            let ok_bound = t.is_program_param(b) || t.constant(b).is_some();
            if ok_bound && !assigns(body, var) {
                found = Some((var.clone(), b.clone()));
            }
        }
    });
    found
}

fn assigns(s: &Stmt, v: &str) -> bool {
    let mut hit = false;
    s.walk(&mut |s| {
        if let StmtKind::Assign { target: LValue::Var(n), .. } = &s.kind {
            hit |= n == v;
        }
    });
    hit
}

pub fn reduce_granularity(g: &SourceCfg) -> Result<SourceCfg, StrategyError> {
    let Some((k, s)) = find_granularity_loop(g) else {
        return Err(inapplicable(ID, "no serial loop bounded by a program parameter"));
    };
    let one = |v: &str| (v == s).then_some(Expr::Int(1));
    let zero = |v: &str| (v == k).then_some(Expr::Int(0));
    let done = Cell::new(false);
    let unroll = |st: &Stmt| -> Option<Vec<Stmt>> {
        match &st.kind {
            StmtKind::For { var, bound: Expr::Var(b), body, .. } if !done.get() && *var == k && *b == s => {
                done.set(true);
                let body = body.map_exprs(&|e| simplify(&e.substitute(&zero)));
                Some(match body.kind {
                    StmtKind::Block(stmts) => stmts,
                    _ => vec![body],
                })
            }
            _ => None,
        }
    };
    let p = g.program().map_schedule(|cache, body| {
        let body = body.map(&mut |st| match st.kind {
            StmtKind::Block(stmts) => {
                let mut out = Vec::new();
                for c in stmts {
                    match unroll(&c) {
                        Some(inner) => out.extend(inner),
                        None => out.push(c),
                    }
                }
                Stmt { kind: StmtKind::Block(out), span: st.span }
            }
            StmtKind::MetaFor { var, bound, role, body } => {
                let body = match unroll(&body) {
                    Some(inner) => Box::new(Stmt::block(inner)),
                    None => body,
                };
                Stmt { kind: StmtKind::MetaFor { var, bound, role, body }, span: st.span }
            }
            _ => st,
        });
        (cache.to_vec(), body)
    });
    if !done.get() {
        return Err(inapplicable(ID, "the serial loop is not directly inside a block"));
    }
    let items = p.items.iter().map(|item| item.map_exprs(&|e| simplify(&e.substitute(&one))));
    Ok(g.with_program(Program { items: items.collect() })?)
}
