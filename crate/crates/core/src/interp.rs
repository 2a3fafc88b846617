//! Sequential reference interpreter for compile units.
//!
//! `meta_for` loops run in iteration order; `cache` clauses have no effect on
//! results. The nest body can be swapped for another executor (for instance
//! the IR interpreter) to compare both on the same inputs.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dsl::{
    fold_binop, AssignOp, BinOp, Expr, LValue, Program, Stmt, StmtKind, UnOp,
};

pub type Arrays = BTreeMap<String, Vec<i64>>;
pub type Scalars = BTreeMap<String, i64>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InterpError {
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("index {index} out of bounds for `{array}` of length {len}")]
    OutOfBounds { array: String, index: i64, len: usize },
    #[error("arithmetic error evaluating `{0}`")]
    Arithmetic(String),
    #[error("assertion failed: {0}")]
    AssertFailed(String),
    #[error("step limit exceeded")]
    StepLimit,
}

const STEP_LIMIT: u64 = 50_000_000;

/// Array lengths (product of dimensions) for the given parameter values.
pub fn array_sizes(p: &Program, params: &Scalars) -> Result<BTreeMap<String, usize>, InterpError> {
    let mut st = State::new(params.clone());
    let mut out = BTreeMap::new();
    for item in &p.items {
        if let StmtKind::Decl { name, dims, init, .. } = &item.kind {
            if dims.is_empty() {
                if let Some(e) = init {
                    let v = st.eval(e, &mut BTreeMap::new())?;
                    st.scalars.insert(name.clone(), v);
                }
            } else {
                let mut n: i64 = 1;
                for d in dims {
                    let v = st.eval(d, &mut BTreeMap::new())?;
                    n = n.checked_mul(v.max(0)).ok_or_else(|| InterpError::Arithmetic(name.clone()))?;
                }
                out.insert(name.clone(), n as usize);
            }
        }
    }
    Ok(out)
}

/// Checks the top-level asserts for these parameter values.
pub fn check_asserts(p: &Program, params: &Scalars) -> Result<bool, InterpError> {
    let mut st = State::new(params.clone());
    for item in &p.items {
        match &item.kind {
            StmtKind::Decl { name, dims, init: Some(e), .. } if dims.is_empty() => {
                let v = st.eval(e, &mut BTreeMap::new())?;
                st.scalars.insert(name.clone(), v);
            }
            StmtKind::Assert(e) => match st.eval(e, &mut BTreeMap::new()) {
                Ok(0) | Err(InterpError::Arithmetic(_)) => return Ok(false),
                Ok(_) => {}
                Err(e) => return Err(e),
            },
            _ => {}
        }
    }
    Ok(true)
}

pub fn run_program(p: &Program, params: &Scalars, arrays: Arrays) -> Result<Arrays, InterpError> {
    let nest = p.nest().map_err(|e| InterpError::Unbound(e.to_string()))?;
    let body = nest.body.clone();
    let dims = dims_of(p, params)?;
    run_program_with(p, params, arrays, &mut |scalars, arrays| {
        let mut st = State {
            scalars: scalars.clone(),
            arrays: std::mem::take(arrays),
            dims: dims.clone(),
            steps: 0,
        };
        let mut locals = BTreeMap::new();
        let r = st.exec(&body, &mut locals);
        *arrays = st.arrays;
        r
    })
}

fn dims_of(p: &Program, scalars: &Scalars) -> Result<BTreeMap<String, i64>, InterpError> {
    let mut st = State::new(scalars.clone());
    let mut out = BTreeMap::new();
    for item in p.top_decls() {
        if let StmtKind::Decl { name, dims, init, .. } = &item.kind {
            if let (true, Some(e)) = (dims.is_empty(), init) {
                let v = st.eval(e, &mut BTreeMap::new())?;
                st.scalars.insert(name.clone(), v);
            }
            if dims.len() == 2 {
                out.insert(name.clone(), st.eval(&dims[1], &mut BTreeMap::new())?);
            }
        }
    }
    Ok(out)
}

/// Runs the compile unit, handing every thread of the nest (with all
/// scalars in scope, loop indices included) to `body`.
pub fn run_program_with(
    p: &Program,
    params: &Scalars,
    arrays: Arrays,
    body: &mut dyn FnMut(&Scalars, &mut Arrays) -> Result<(), InterpError>,
) -> Result<Arrays, InterpError> {
    let mut st = State::new(params.clone());
    st.arrays = arrays;
    st.dims = dims_of(p, params).unwrap_or_default();
    for item in &p.items {
        st.top(item, body)?;
    }
    Ok(st.arrays)
}

struct State {
    scalars: Scalars,
    arrays: Arrays,
    /// Row length of 2-D arrays.
    dims: BTreeMap<String, i64>,
    steps: u64,
}

impl State {
    fn new(scalars: Scalars) -> State {
        State {
            scalars,
            arrays: Arrays::new(),
            dims: BTreeMap::new(),
            steps: 0,
        }
    }

    fn tick(&mut self) -> Result<(), InterpError> {
        self.steps += 1;
        if self.steps > STEP_LIMIT {
            return Err(InterpError::StepLimit);
        }
        Ok(())
    }

    /// Executes top-level code; the schedule body goes to `body`.
    fn top(
        &mut self,
        s: &Stmt,
        body: &mut dyn FnMut(&Scalars, &mut Arrays) -> Result<(), InterpError>,
    ) -> Result<(), InterpError> {
        self.tick()?;
        match &s.kind {
            StmtKind::Decl { name, dims, init, .. } => {
                if dims.is_empty() {
                    if let Some(e) = init {
                        let v = self.eval(e, &mut BTreeMap::new())?;
                        self.scalars.insert(name.clone(), v);
                    }
                }
            }
            StmtKind::Assert(e) => {
                if self.eval(e, &mut BTreeMap::new())? == 0 {
                    return Err(InterpError::AssertFailed(crate::dsl::expr_to_string(e)));
                }
            }
            StmtKind::For { var, init, bound, body: b } => {
                let mut i = self.eval(init, &mut BTreeMap::new())?;
                loop {
                    self.tick()?;
                    self.scalars.insert(var.clone(), i);
                    if i >= self.eval(bound, &mut BTreeMap::new())? {
                        break;
                    }
                    self.top(b, body)?;
                    i += 1;
                }
                self.scalars.remove(var);
            }
            StmtKind::While { cond, body: b } => {
                while self.eval(cond, &mut BTreeMap::new())? != 0 {
                    self.tick()?;
                    self.top(b, body)?;
                }
            }
            StmtKind::If { cond, then, els } => {
                if self.eval(cond, &mut BTreeMap::new())? != 0 {
                    self.top(then, body)?;
                } else if let Some(e) = els {
                    self.top(e, body)?;
                }
            }
            StmtKind::Block(ss) => {
                for s in ss {
                    self.top(s, body)?;
                }
            }
            StmtKind::MetaSchedule { body: b, .. } => self.nest(b, body)?,
            StmtKind::MetaFor { .. } => unreachable!("meta_for only inside meta_schedule"),
            StmtKind::Assign { .. } => {
                return Err(InterpError::Unbound("assignment outside meta_schedule".into()))
            }
        }
        Ok(())
    }

    fn nest(
        &mut self,
        s: &Stmt,
        body: &mut dyn FnMut(&Scalars, &mut Arrays) -> Result<(), InterpError>,
    ) -> Result<(), InterpError> {
        match &s.kind {
            StmtKind::MetaFor { var, bound, body: b, .. } => {
                let n = self.eval(bound, &mut BTreeMap::new())?;
                for i in 0..n {
                    self.tick()?;
                    self.scalars.insert(var.clone(), i);
                    self.nest(b, body)?;
                }
                self.scalars.remove(var);
                Ok(())
            }
            StmtKind::Block(ss) if ss.len() == 1 && matches!(ss[0].kind, StmtKind::MetaFor { .. }) => {
                self.nest(&ss[0], body)
            }
            _ => body(&self.scalars, &mut self.arrays),
        }
    }

    fn lookup(&self, name: &str, locals: &BTreeMap<String, i64>) -> Result<i64, InterpError> {
        locals
            .get(name)
            .or_else(|| self.scalars.get(name))
            .copied()
            .ok_or_else(|| InterpError::Unbound(name.to_string()))
    }

    fn flat_index(
        &mut self,
        array: &str,
        indices: &[Expr],
        locals: &mut BTreeMap<String, i64>,
    ) -> Result<usize, InterpError> {
        let mut idx = self.eval(&indices[0], locals)?;
        if indices.len() == 2 {
            let row = *self.dims.get(array).ok_or_else(|| InterpError::Unbound(array.to_string()))?;
            let j = self.eval(&indices[1], locals)?;
            idx = idx
                .checked_mul(row)
                .and_then(|x| x.checked_add(j))
                .ok_or_else(|| InterpError::Arithmetic(array.to_string()))?;
        }
        let len = self
            .arrays
            .get(array)
            .ok_or_else(|| InterpError::Unbound(array.to_string()))?
            .len();
        if idx < 0 || idx as usize >= len {
            return Err(InterpError::OutOfBounds { array: array.to_string(), index: idx, len });
        }
        Ok(idx as usize)
    }

    fn eval(&mut self, e: &Expr, locals: &mut BTreeMap<String, i64>) -> Result<i64, InterpError> {
        match e {
            Expr::Int(n) => Ok(*n),
            Expr::Var(v) => self.lookup(v, locals),
            Expr::Index { array, indices } => {
                let i = self.flat_index(array, indices, locals)?;
                Ok(self.arrays[array][i])
            }
            Expr::Unary(UnOp::Neg, x) => {
                let v = self.eval(x, locals)?;
                v.checked_neg().ok_or_else(|| InterpError::Arithmetic(crate::dsl::expr_to_string(e)))
            }
            Expr::Unary(UnOp::Not, x) => Ok((self.eval(x, locals)? == 0) as i64),
            Expr::Binary(BinOp::And, a, b) => {
                Ok((self.eval(a, locals)? != 0 && self.eval(b, locals)? != 0) as i64)
            }
            Expr::Binary(BinOp::Or, a, b) => {
                Ok((self.eval(a, locals)? != 0 || self.eval(b, locals)? != 0) as i64)
            }
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, locals)?;
                let y = self.eval(b, locals)?;
                fold_binop(*op, x, y).ok_or_else(|| InterpError::Arithmetic(crate::dsl::expr_to_string(e)))
            }
        }
    }

    fn exec(&mut self, s: &Stmt, locals: &mut BTreeMap<String, i64>) -> Result<(), InterpError> {
        self.tick()?;
        match &s.kind {
            StmtKind::Decl { name, init, .. } => {
                let v = match init {
                    Some(e) => self.eval(e, locals)?,
                    None => 0,
                };
                locals.insert(name.clone(), v);
            }
            StmtKind::Assign { target, op, value } => {
                let v = self.eval(value, locals)?;
                match target {
                    LValue::Var(n) => {
                        let v = self.combine(*op, || self.lookup(n, locals), v, n)?;
                        locals.insert(n.clone(), v);
                    }
                    LValue::Index { array, indices } => {
                        let i = self.flat_index(array, indices, locals)?;
                        let old = self.arrays[array][i];
                        let v = self.combine(*op, || Ok(old), v, array)?;
                        self.arrays.get_mut(array).unwrap()[i] = v;
                    }
                }
            }
            StmtKind::For { var, init, bound, body } => {
                let mut i = self.eval(init, locals)?;
                loop {
                    self.tick()?;
                    locals.insert(var.clone(), i);
                    if i >= self.eval(bound, locals)? {
                        break;
                    }
                    self.exec(body, locals)?;
                    i = self.lookup(var, locals)? + 1;
                }
            }
            StmtKind::While { cond, body } => {
                while self.eval(cond, locals)? != 0 {
                    self.tick()?;
                    self.exec(body, locals)?;
                }
            }
            StmtKind::If { cond, then, els } => {
                if self.eval(cond, locals)? != 0 {
                    self.exec(then, locals)?;
                } else if let Some(e) = els {
                    self.exec(e, locals)?;
                }
            }
            StmtKind::Block(ss) => {
                for s in ss {
                    self.exec(s, locals)?;
                }
            }
            StmtKind::Assert(e) => {
                if self.eval(e, locals)? == 0 {
                    return Err(InterpError::AssertFailed(crate::dsl::expr_to_string(e)));
                }
            }
            StmtKind::MetaFor { .. } | StmtKind::MetaSchedule { .. } => {
                return Err(InterpError::Unbound("nested parallel construct".into()))
            }
        }
        Ok(())
    }

    fn combine(
        &self,
        op: AssignOp,
        old: impl FnOnce() -> Result<i64, InterpError>,
        v: i64,
        what: &str,
    ) -> Result<i64, InterpError> {
        match op.bin_op() {
            None => Ok(v),
            Some(b) => fold_binop(b, old()?, v).ok_or_else(|| InterpError::Arithmetic(what.to_string())),
        }
    }
}
