//! Splitting the free scalars of a compile unit into data parameters,
//! program parameters and the other name categories.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::simplify::simplify;
use super::DslError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayDecl {
    pub name: String,
    /// Dimension expressions with derived scalars expanded.
    pub dims: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParamTable {
    /// Declaration order.
    pub data_params: Vec<String>,
    pub program_params: Vec<String>,
    pub arrays: Vec<ArrayDecl>,
    /// `int x = e;` at top level, `e` already expanded.
    pub derived: Vec<(String, Expr)>,
    pub constants: Vec<(String, i64)>,
    /// Indices of the serial loops around the `meta_schedule`.
    pub context_vars: Vec<String>,
    /// Top-level `assert` conditions, expanded.
    pub asserts: Vec<Expr>,
    /// Why each name landed in its category.
    pub provenance: BTreeMap<String, String>,
}

impl ParamTable {
    pub fn params(&self) -> impl Iterator<Item = &String> {
        self.data_params.iter().chain(&self.program_params)
    }

    pub fn is_param(&self, name: &str) -> bool {
        self.params().any(|p| p == name)
    }

    pub fn is_data_param(&self, name: &str) -> bool {
        self.data_params.iter().any(|p| p == name)
    }

    pub fn is_program_param(&self, name: &str) -> bool {
        self.program_params.iter().any(|p| p == name)
    }

    pub fn array(&self, name: &str) -> Option<&ArrayDecl> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<i64> {
        self.constants.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn derived(&self, name: &str) -> Option<&Expr> {
        self.derived.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    /// Substitutes derived scalars by their definitions.
    pub fn expand(&self, e: &Expr) -> Expr {
        simplify(&e.substitute(&|v| self.derived(v).cloned()))
    }

    /// Like [`ParamTable::expand`], then also replaces constants by value.
    pub fn expand_all(&self, e: &Expr) -> Expr {
        let e = e.substitute(&|v| self.derived(v).cloned());
        simplify(&e.substitute(&|v| self.constant(v).map(Expr::Int)))
    }

    /// Names that are fixed for the whole launch: parameters, constants,
    /// derived scalars and context loop indices.
    pub fn is_uniform(&self, name: &str) -> bool {
        self.is_param(name)
            || self.constant(name).is_some()
            || self.derived(name).is_some()
            || self.context_vars.iter().any(|v| v == name)
    }
}

pub fn classify_parameters(p: &Program) -> Result<ParamTable, DslError> {
    let mut t = ParamTable::default();
    let mut candidates: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();

    for item in p.top_decls() {
        let StmtKind::Decl {
            is_const,
            name,
            dims,
            init,
        } = &item.kind
        else {
            unreachable!()
        };
        if !seen.insert(name.clone()) {
            return Err(DslError::Classification {
                name: name.clone(),
                msg: "declared twice".into(),
            });
        }
        if !dims.is_empty() {
            if init.is_some() {
                return Err(DslError::Classification {
                    name: name.clone(),
                    msg: "array initializers are not supported".into(),
                });
            }
            t.arrays.push(ArrayDecl {
                name: name.clone(),
                dims: dims.clone(),
            });
            t.provenance.insert(name.clone(), "data array".into());
        } else if *is_const {
            let Some(init) = init else {
                return Err(DslError::Classification {
                    name: name.clone(),
                    msg: "const scalar without initializer".into(),
                });
            };
            match t.expand_all(init) {
                Expr::Int(v) => t.constants.push((name.clone(), v)),
                _ => {
                    return Err(DslError::Classification {
                        name: name.clone(),
                        msg: "const initializer is not an integer constant".into(),
                    })
                }
            }
            t.provenance.insert(name.clone(), "constant".into());
        } else if let Some(init) = init {
            let e = t.expand(init);
            t.derived.push((name.clone(), e));
            t.provenance
                .insert(name.clone(), "derived scalar (expanded at use)".into());
        } else {
            candidates.push(name.clone());
        }
    }

    for a in &mut t.arrays {
        a.dims = a
            .dims
            .iter()
            .map(|d| simplify(&d.substitute(&|v| t.derived.iter().find(|(n, _)| n == v).map(|(_, e)| e.clone()))))
            .collect();
    }

    let mut context_refs = BTreeSet::new();
    let mut body = None;
    for item in &p.items {
        if matches!(item.kind, StmtKind::Decl { .. }) {
            continue;
        }
        if let StmtKind::Assert(e) = &item.kind {
            t.asserts.push(t.expand(e));
            continue;
        }
        collect_context(item, &mut t.context_vars, &mut context_refs, &mut body);
    }
    let body = body.expect("parsed programs always hold a meta_schedule");
    for v in &t.context_vars {
        if seen.contains(v) {
            return Err(DslError::Classification {
                name: v.clone(),
                msg: "context loop index shadows a top-level declaration".into(),
            });
        }
        t.provenance.insert(v.clone(), "context loop index".into());
    }

    let mut dim_refs = BTreeSet::new();
    for a in &t.arrays {
        for d in &a.dims {
            d.visit_vars(&mut |v| {
                dim_refs.insert(v.to_string());
            });
        }
    }
    let mut context_expanded = BTreeSet::new();
    for r in &context_refs {
        t.expand(&Expr::var(r.clone())).visit_vars(&mut |v| {
            context_expanded.insert(v.to_string());
        });
    }

    let arrays: BTreeSet<&str> = t.arrays.iter().map(|a| a.name.as_str()).collect();
    let known_top: BTreeSet<String> = seen
        .iter()
        .cloned()
        .chain(t.context_vars.iter().cloned())
        .collect();
    let usage = scan_body(body, &known_top, &arrays)?;
    if let Some(w) = usage.top_writes.first() {
        return Err(DslError::Classification {
            name: w.clone(),
            msg: if candidates.contains(w) {
                "read and also written inside meta_schedule, so it is neither a parameter nor a local".into()
            } else {
                "top-level scalar written inside meta_schedule".into()
            },
        });
    }

    let mut reads = usage.reads;
    for (_, e) in &t.derived {
        e.visit_vars(&mut |v| {
            reads.insert(v.to_string());
        });
    }
    for e in &t.asserts {
        e.visit_vars(&mut |v| {
            reads.insert(v.to_string());
        });
    }
    reads.extend(dim_refs.iter().cloned());
    reads.extend(context_expanded.iter().cloned());

    for c in candidates {
        if !reads.contains(&c) {
            t.provenance.insert(c, "unused scalar".into());
            continue;
        }
        if dim_refs.contains(&c) {
            t.provenance
                .insert(c.clone(), "data parameter: appears in an array dimension".into());
            t.data_params.push(c);
        } else if context_expanded.contains(&c) {
            t.provenance.insert(
                c.clone(),
                "data parameter: bounds the serial code around meta_schedule".into(),
            );
            t.data_params.push(c);
        } else {
            t.provenance
                .insert(c.clone(), "program parameter".into());
            t.program_params.push(c);
        }
    }
    Ok(t)
}

fn collect_context<'a>(
    s: &'a Stmt,
    vars: &mut Vec<String>,
    refs: &mut BTreeSet<String>,
    body: &mut Option<&'a Stmt>,
) {
    let note = |e: &Expr, refs: &mut BTreeSet<String>| {
        e.visit_vars(&mut |v| {
            refs.insert(v.to_string());
        })
    };
    match &s.kind {
        StmtKind::MetaSchedule { body: b, .. } => *body = Some(b),
        StmtKind::For {
            var,
            init,
            bound,
            body: b,
        } => {
            if !vars.contains(var) {
                vars.push(var.clone());
            }
            note(init, refs);
            note(bound, refs);
            collect_context(b, vars, refs, body);
        }
        StmtKind::While { cond, body: b } => {
            note(cond, refs);
            collect_context(b, vars, refs, body);
        }
        StmtKind::If { cond, then, els } => {
            note(cond, refs);
            collect_context(then, vars, refs, body);
            if let Some(e) = els {
                collect_context(e, vars, refs, body);
            }
        }
        StmtKind::Block(ss) => ss
            .iter()
            .for_each(|s| collect_context(s, vars, refs, body)),
        _ => {}
    }
}

struct BodyUsage {
    reads: BTreeSet<String>,
    top_writes: Vec<String>,
}

/// Checks every name used in the schedule body and records reads of
/// top-level names and writes to top-level scalars.
fn scan_body(
    body: &Stmt,
    top: &BTreeSet<String>,
    arrays: &BTreeSet<&str>,
) -> Result<BodyUsage, DslError> {
    let mut u = BodyUsage {
        reads: BTreeSet::new(),
        top_writes: Vec::new(),
    };
    let mut scope: Vec<String> = Vec::new();
    scan(body, top, arrays, &mut scope, &mut u)?;
    Ok(u)
}

fn check_expr(
    e: &Expr,
    top: &BTreeSet<String>,
    arrays: &BTreeSet<&str>,
    scope: &[String],
    u: &mut BodyUsage,
) -> Result<(), DslError> {
    let mut err = None;
    e.visit_vars(&mut |v| {
        if scope.iter().any(|s| s == v) {
            return;
        }
        if top.contains(v) {
            u.reads.insert(v.to_string());
        } else if err.is_none() {
            err = Some(v.to_string());
        }
    });
    e.visit_loads(&mut |a, _| {
        if !arrays.contains(a) && err.is_none() {
            err = Some(a.to_string());
        }
    });
    match err {
        Some(name) => Err(DslError::Classification {
            name,
            msg: "undeclared".into(),
        }),
        None => Ok(()),
    }
}

fn scan(
    s: &Stmt,
    top: &BTreeSet<String>,
    arrays: &BTreeSet<&str>,
    scope: &mut Vec<String>,
    u: &mut BodyUsage,
) -> Result<(), DslError> {
    match &s.kind {
        StmtKind::Decl {
            name, dims, init, ..
        } => {
            if !dims.is_empty() {
                return Err(DslError::Classification {
                    name: name.clone(),
                    msg: "arrays cannot be declared inside meta_schedule".into(),
                });
            }
            if let Some(e) = init {
                check_expr(e, top, arrays, scope, u)?;
            }
            scope.push(name.clone());
        }
        StmtKind::Assign { target, value, .. } => {
            check_expr(value, top, arrays, scope, u)?;
            match target {
                LValue::Var(v) => {
                    if !scope.iter().any(|s| s == v) {
                        if top.contains(v) && !arrays.contains(v.as_str()) {
                            if !u.top_writes.contains(v) {
                                u.top_writes.push(v.clone());
                            }
                        } else {
                            return Err(DslError::Classification {
                                name: v.clone(),
                                msg: "undeclared".into(),
                            });
                        }
                    }
                }
                LValue::Index { array, indices } => {
                    if !arrays.contains(array.as_str()) {
                        return Err(DslError::Classification {
                            name: array.clone(),
                            msg: "undeclared array".into(),
                        });
                    }
                    for i in indices {
                        check_expr(i, top, arrays, scope, u)?;
                    }
                }
            }
        }
        StmtKind::For {
            var,
            init,
            bound,
            body,
        } => {
            check_expr(init, top, arrays, scope, u)?;
            check_expr(bound, top, arrays, scope, u)?;
            let mark = scope.len();
            scope.push(var.clone());
            scan(body, top, arrays, scope, u)?;
            scope.truncate(mark);
        }
        StmtKind::MetaFor {
            var, bound, body, ..
        } => {
            check_expr(bound, top, arrays, scope, u)?;
            let mark = scope.len();
            scope.push(var.clone());
            scan(body, top, arrays, scope, u)?;
            scope.truncate(mark);
        }
        StmtKind::While { cond, body } => {
            check_expr(cond, top, arrays, scope, u)?;
            let mark = scope.len();
            scan(body, top, arrays, scope, u)?;
            scope.truncate(mark);
        }
        StmtKind::If { cond, then, els } => {
            check_expr(cond, top, arrays, scope, u)?;
            let mark = scope.len();
            scan(then, top, arrays, scope, u)?;
            scope.truncate(mark);
            if let Some(e) = els {
                scan(e, top, arrays, scope, u)?;
                scope.truncate(mark);
            }
        }
        StmtKind::Block(ss) => {
            let mark = scope.len();
            for s in ss {
                scan(s, top, arrays, scope, u)?;
            }
            scope.truncate(mark);
        }
        StmtKind::Assert(e) => check_expr(e, top, arrays, scope, u)?,
        StmtKind::MetaSchedule { .. } => {
            return Err(DslError::Nest("nested meta_schedule".into()));
        }
    }
    Ok(())
}
