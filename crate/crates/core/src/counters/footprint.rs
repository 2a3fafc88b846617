//! Shared-memory footprint of one thread block.
//!
//! Every access to a cached array is turned into an affine index in the
//! block-local indices (thread `meta_for` indices and serial loop indices),
//! with grid indices, context indices and parameters as symbols. Accesses
//! are grouped by their symbolic base and local stride pattern; a group
//! covers the product of its extents, widened by the spread of constant
//! offsets along a unit-stride dimension. Groups are summed per array. An
//! `if`/`else` on a block-uniform condition splits the body into exclusive
//! alternatives, and the result is the coefficient-wise maximum over them.

use std::collections::{BTreeMap, BTreeSet};

use super::CounterError;
use crate::algebra::{rat, Poly, Rat};
use crate::dsl::{expr_to_string, AssignOp, BinOp, Expr, LValue, LoopRole, ParamTable, Stmt, StmtKind, UnOp};
use crate::model::SourceCfg;

#[derive(Debug, Clone)]
struct Access {
    array: String,
    index: Option<Poly>,
    text: String,
    /// Active block-local indices and their trip counts.
    locals: Vec<(String, Poly)>,
    written: bool,
}

#[derive(Debug, Clone, Default)]
struct Alt {
    env: BTreeMap<String, Option<Poly>>,
    accesses: Vec<Access>,
    /// Block-uniform branch conditions leading here, with the arm taken.
    conds: Vec<(Expr, bool)>,
}

/// A box of elements of one cached array touched by a block: the elements
/// `base + lo + x0 + x1*s1 + x2*s2 + ...` for `x0 < width` and `xk < ek`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub array: String,
    /// Flat index of the first element, without its constant part.
    pub base: Poly,
    pub lo: i64,
    pub width: Poly,
    /// Strides and extents of the remaining dimensions, innermost first.
    pub dims: Vec<(Poly, Poly)>,
    pub written: bool,
}

impl Region {
    pub fn size(&self) -> Poly {
        self.dims.iter().fold(self.width.clone(), |acc, (_, e)| acc * e.clone())
    }
}

/// The regions of one exclusive alternative of the body, with the
/// conditions selecting it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub conds: Vec<(Expr, bool)>,
    pub regions: Vec<Region>,
}

impl Layout {
    pub fn size(&self) -> Poly {
        self.regions.iter().fold(Poly::zero(), |acc, r| acc + r.size())
    }
}

struct Walker<'a> {
    params: &'a ParamTable,
    cache: BTreeSet<String>,
    grid: BTreeSet<String>,
    locals: Vec<(String, Poly)>,
}

/// Shared words per block and the accesses that contributed.
pub fn shared_words(g: &SourceCfg) -> Result<(Poly, Vec<String>), CounterError> {
    let (layouts, trace) = analyze(g)?;
    let mut best: Option<Poly> = None;
    for l in &layouts {
        let v = l.size();
        best = Some(match best {
            None => v,
            Some(b) if b == v => b,
            Some(b) => b.coefficient_max(&v),
        });
    }
    Ok((best.unwrap_or_else(Poly::zero), trace))
}

/// Cached regions of each exclusive alternative of the body.
pub fn layouts(g: &SourceCfg) -> Result<Vec<Layout>, CounterError> {
    Ok(analyze(g)?.0)
}

fn analyze(g: &SourceCfg) -> Result<(Vec<Layout>, Vec<String>), CounterError> {
    let cache: BTreeSet<String> = g.cache().iter().cloned().collect();
    if cache.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let params = g.params();
    let mut w = Walker {
        params,
        cache,
        grid: BTreeSet::new(),
        locals: Vec::new(),
    };
    for l in g.meta_loops() {
        match l.role {
            LoopRole::Grid => {
                w.grid.insert(l.var.clone());
            }
            LoopRole::Thread => {
                let ext = w.poly(&Alt::default(), &l.bound).ok_or_else(|| CounterError::NonAffine {
                    access: format!("thread loop bound {}", expr_to_string(&l.bound)),
                })?;
                w.locals.push((l.var.clone(), ext));
            }
        }
    }
    let alts = w.stmt(&g.nest().body, vec![Alt::default()])?;
    let mut trace = Vec::new();
    let mut out = Vec::new();
    for alt in &alts {
        out.push(Layout {
            conds: alt.conds.clone(),
            regions: alt_regions(alt, &mut trace)?,
        });
    }
    trace.sort();
    trace.dedup();
    Ok((out, trace))
}

impl Walker<'_> {
    fn uniform(&self, e: &Expr) -> bool {
        let mut ok = true;
        e.visit_vars(&mut |v| ok &= self.params.is_uniform(v) || self.grid.contains(v));
        ok
    }

    /// Polynomial value of a pure expression, `None` when it is not one.
    fn poly(&self, alt: &Alt, e: &Expr) -> Option<Poly> {
        match e {
            Expr::Int(n) => Some(Poly::int(*n)),
            Expr::Var(v) => {
                if let Some(p) = alt.env.get(v) {
                    return p.clone();
                }
                if let Some(c) = self.params.constant(v) {
                    return Some(Poly::int(c));
                }
                if let Some(d) = self.params.derived(v) {
                    return self.poly(alt, &d.clone());
                }
                Some(Poly::var(v))
            }
            Expr::Index { .. } => None,
            Expr::Unary(UnOp::Neg, a) => Some(Poly::zero() - self.poly(alt, a)?),
            Expr::Unary(UnOp::Not, _) => None,
            Expr::Binary(op, a, b) => {
                let pa = self.poly(alt, a)?;
                let pb = self.poly(alt, b)?;
                match op {
                    BinOp::Add => Some(pa + pb),
                    BinOp::Sub => Some(pa - pb),
                    BinOp::Mul => Some(pa * pb),
                    BinOp::Div => {
                        let c = pb.as_constant().filter(|c| *c != rat(0))?;
                        Some(pa.scale(&(Rat::from_integer(1.into()) / c)))
                    }
                    _ => None,
                }
            }
        }
    }

    fn flat_index(&self, alt: &Alt, array: &str, indices: &[Expr]) -> Option<Poly> {
        let dims = &self.params.array(array)?.dims;
        let mut acc = self.poly(alt, indices.first()?)?;
        for (k, ix) in indices.iter().enumerate().skip(1) {
            let d = self.poly(&Alt::default(), dims.get(k)?)?;
            acc = acc * d + self.poly(alt, ix)?;
        }
        Some(acc)
    }

    fn record(&self, alt: &mut Alt, array: &str, indices: &[Expr]) {
        self.record_access(alt, array, indices, false);
    }

    fn record_access(&self, alt: &mut Alt, array: &str, indices: &[Expr], written: bool) {
        if !self.cache.contains(array) {
            return;
        }
        let text = format!(
            "{array}[{}]",
            indices.iter().map(expr_to_string).collect::<Vec<_>>().join("][")
        );
        let index = self.flat_index(alt, array, indices);
        alt.accesses.push(Access {
            array: array.to_string(),
            index,
            text,
            locals: self.locals.clone(),
            written,
        });
    }

    fn reads(&self, alt: &mut Alt, e: &Expr) {
        let mut loads: Vec<(String, Vec<Expr>)> = Vec::new();
        e.visit_loads(&mut |a, ix| loads.push((a.to_string(), ix.to_vec())));
        for (a, ix) in loads {
            self.record(alt, &a, &ix);
        }
    }

    fn stmt(&mut self, s: &Stmt, alts: Vec<Alt>) -> Result<Vec<Alt>, CounterError> {
        match &s.kind {
            StmtKind::Block(stmts) => {
                let mut alts = alts;
                for s in stmts {
                    alts = self.stmt(s, alts)?;
                }
                Ok(alts)
            }
            StmtKind::Decl { name, dims, init, .. } => Ok(alts
                .into_iter()
                .map(|mut a| {
                    dims.iter().for_each(|d| self.reads(&mut a, d));
                    let v = init.as_ref().and_then(|e| {
                        self.reads(&mut a, e);
                        self.poly(&a, e)
                    });
                    a.env.insert(name.clone(), v);
                    a
                })
                .collect()),
            StmtKind::Assign { target, op, value } => Ok(alts
                .into_iter()
                .map(|mut a| {
                    self.reads(&mut a, value);
                    match target {
                        LValue::Var(v) => {
                            let rhs = self.poly(&a, value);
                            let cur = self.poly(&a, &Expr::var(v));
                            let new = match (op, rhs, cur) {
                                (AssignOp::Set, r, _) => r,
                                (AssignOp::Add, Some(r), Some(c)) => Some(c + r),
                                (AssignOp::Sub, Some(r), Some(c)) => Some(c - r),
                                (AssignOp::Mul, Some(r), Some(c)) => Some(c * r),
                                _ => None,
                            };
                            a.env.insert(v.clone(), new);
                        }
                        LValue::Index { array, indices } => {
                            indices.iter().for_each(|i| self.reads(&mut a, i));
                            if *op != AssignOp::Set {
                                self.record(&mut a, array, indices);
                            }
                            self.record_access(&mut a, array, indices, true);
                        }
                    }
                    a
                })
                .collect()),
            StmtKind::Assert(e) => Ok(alts
                .into_iter()
                .map(|mut a| {
                    self.reads(&mut a, e);
                    a
                })
                .collect()),
            StmtKind::If { cond, then, els } => {
                let mut out = Vec::new();
                let exclusive = self.uniform(cond) && els.is_some();
                for mut a in alts {
                    self.reads(&mut a, cond);
                    let t = self.stmt(then, vec![a.clone()])?;
                    let e = match els {
                        Some(e) => self.stmt(e, vec![a.clone()])?,
                        None => vec![a.clone()],
                    };
                    if exclusive {
                        let c = self.params.expand_all(cond);
                        out.extend(t.into_iter().map(|mut x| {
                            x.conds.push((c.clone(), true));
                            x
                        }));
                        out.extend(e.into_iter().map(|mut x| {
                            x.conds.push((c.clone(), false));
                            x
                        }));
                    } else {
                        for x in &t {
                            for y in &e {
                                out.push(merge(&a, x, y));
                            }
                        }
                    }
                }
                Ok(out)
            }
            StmtKind::For { var, init, bound, body } => {
                let assigned = assigned_in(body);
                let mut alts = alts;
                let mut ext = None;
                for a in &mut alts {
                    self.reads(a, init);
                    self.reads(a, bound);
                    for v in &assigned {
                        if a.env.contains_key(v) {
                            a.env.insert(v.clone(), None);
                        }
                    }
                    let lo = self.poly(a, init);
                    let hi = self.poly(a, bound);
                    let e = match (&lo, &hi) {
                        (Some(lo), Some(hi)) if !self.mentions_local(lo) && !self.mentions_local(hi) => {
                            Some(hi.clone() - lo.clone())
                        }
                        _ => None,
                    };
                    a.env.insert(var.clone(), lo.map(|lo| lo + Poly::var(var)));
                    ext = e;
                }
                let Some(ext) = ext else {
                    return Err(CounterError::NonAffine {
                        access: format!("loop bound {}", expr_to_string(bound)),
                    });
                };
                self.locals.push((var.clone(), ext));
                let r = self.stmt(body, alts);
                self.locals.pop();
                let mut alts = r?;
                for a in &mut alts {
                    a.env.insert(var.clone(), None);
                    for v in &assigned {
                        if a.env.contains_key(v) {
                            a.env.insert(v.clone(), None);
                        }
                    }
                }
                Ok(alts)
            }
            StmtKind::While { cond, body } => {
                let mut alts = alts;
                for a in &mut alts {
                    self.reads(a, cond);
                }
                // Trip counts of while loops are unknown, so cached accesses
                // inside one cannot be counted.
                let mut touched = Vec::new();
                body.walk(&mut |s| {
                    if let StmtKind::Assign { target: LValue::Index { array, .. }, .. } = &s.kind {
                        touched.push(array.clone());
                    }
                    for e in stmt_exprs(s) {
                        e.visit_loads(&mut |a, _| touched.push(a.to_string()));
                    }
                });
                if let Some(a) = touched.iter().find(|a| self.cache.contains(*a)) {
                    return Err(CounterError::NonAffine {
                        access: format!("{a}[...] inside a while loop"),
                    });
                }
                let alts = self.stmt(body, alts)?;
                Ok(alts)
            }
            StmtKind::MetaFor { .. } | StmtKind::MetaSchedule { .. } => Ok(alts),
        }
    }

    fn mentions_local(&self, p: &Poly) -> bool {
        self.locals.iter().any(|(l, _)| p.mentions(l))
    }
}

fn stmt_exprs(s: &Stmt) -> Vec<&Expr> {
    match &s.kind {
        StmtKind::Decl { init, .. } => init.iter().collect(),
        StmtKind::Assign { value, target, .. } => {
            let mut v = vec![value];
            if let LValue::Index { indices, .. } = target {
                v.extend(indices);
            }
            v
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } | StmtKind::Assert(cond) => vec![cond],
        StmtKind::For { init, bound, .. } => vec![init, bound],
        _ => Vec::new(),
    }
}

fn assigned_in(s: &Stmt) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    s.walk(&mut |s| {
        if let StmtKind::Assign { target: LValue::Var(v), .. } = &s.kind {
            out.insert(v.clone());
        }
    });
    out
}

/// Both arms of a thread-dependent branch may run in one block.
fn merge(before: &Alt, x: &Alt, y: &Alt) -> Alt {
    let mut env = BTreeMap::new();
    for k in x.env.keys().chain(y.env.keys()) {
        let v = match (x.env.get(k), y.env.get(k)) {
            (Some(a), Some(b)) if a == b => a.clone(),
            _ => None,
        };
        env.insert(k.clone(), v);
    }
    let mut accesses = x.accesses.clone();
    accesses.extend(y.accesses[before.accesses.len()..].iter().cloned());
    Alt {
        env,
        accesses,
        conds: x.conds.clone(),
    }
}

/// One block-local dimension of an access: address stride and trip count.
type Dim = (Poly, Poly);

fn alt_regions(alt: &Alt, trace: &mut Vec<String>) -> Result<Vec<Region>, CounterError> {
    // (array, symbolic base, dims) -> (dims, constant offsets, written)
    type Key = (String, String, Vec<(String, String)>);
    let mut groups: BTreeMap<Key, (Poly, Vec<Dim>, BTreeSet<i64>, bool)> = BTreeMap::new();
    for acc in &alt.accesses {
        let err = || CounterError::NonAffine { access: acc.text.clone() };
        let mut rest = acc.index.clone().ok_or_else(err)?;
        let mut dims: Vec<Dim> = Vec::new();
        for (l, ext) in &acc.locals {
            let (coef, r) = rest.linear_in(l).ok_or_else(err)?;
            if acc.locals.iter().any(|(m, _)| coef.mentions(m)) {
                return Err(err());
            }
            if !coef.is_zero() {
                dims.push((coef, ext.clone()));
            }
            rest = r;
        }
        if acc.locals.iter().any(|(m, _)| rest.mentions(m)) {
            return Err(err());
        }
        let dims = merge_dims(dims);
        let c = rest.constant_term();
        if !c.is_integer() {
            return Err(err());
        }
        let c = c.to_integer().try_into().map_err(|_| err())?;
        let base = rest.non_constant();
        let key_dims = dims.iter().map(|(s, e)| (s.to_string(), e.to_string())).collect();
        let entry = groups
            .entry((acc.array.clone(), base.to_string(), key_dims))
            .or_insert_with(|| (base.clone(), dims.clone(), BTreeSet::new(), false));
        entry.2.insert(c);
        entry.3 |= acc.written;
        trace.push(acc.text.clone());
    }
    let mut out = Vec::new();
    for ((array, _, _), (base, dims, offsets, written)) in groups {
        let lo = *offsets.iter().next().unwrap_or(&0);
        let hi = *offsets.iter().next_back().unwrap_or(&0);
        let unit = dims.iter().position(|(s, _)| *s == Poly::one());
        let mut rest: Vec<Dim> = dims.iter().enumerate().filter(|(k, _)| Some(*k) != unit).map(|(_, d)| d.clone()).collect();
        rest.sort_by_key(|d| (d.0.degree(), d.0.to_string()));
        match unit {
            Some(k) => out.push(Region {
                array,
                base,
                lo,
                width: dims[k].1.clone() + Poly::int(hi - lo),
                dims: rest,
                written,
            }),
            None => {
                for o in offsets {
                    out.push(Region {
                        array: array.clone(),
                        base: base.clone(),
                        lo: o,
                        width: Poly::one(),
                        dims: rest.clone(),
                        written,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Folds `(s, e)` and `(s * e, f)` into `(s, e * f)` until nothing merges.
fn merge_dims(mut dims: Vec<Dim>) -> Vec<Dim> {
    'again: loop {
        for a in 0..dims.len() {
            for b in 0..dims.len() {
                if a != b && dims[b].0 == dims[a].0.clone() * dims[a].1.clone() {
                    let (_, eb) = dims.remove(b);
                    let a = if b < a { a - 1 } else { a };
                    dims[a].1 = dims[a].1.clone() * eb;
                    continue 'again;
                }
            }
        }
        dims.sort_by_key(|(s, e)| (s.to_string(), e.to_string()));
        return dims;
    }
}
