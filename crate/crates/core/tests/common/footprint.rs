//! Brute-force count of the cached elements one block touches.

use std::collections::{BTreeMap, BTreeSet};

use compkern::dsl::{BinOp, Expr, LValue, Stmt, StmtKind, UnOp};
use compkern::interp::Scalars;
use compkern::model::SourceCfg;
use rand::Rng;

/// Independent counter of distinct cached elements touched by one block.
struct Oracle<'a> {
    cache: &'a [String],
    row: BTreeMap<String, i64>,
    seen: BTreeSet<(String, i64)>,
}

impl Oracle<'_> {
    fn eval(&mut self, e: &Expr, env: &Scalars) -> i64 {
        match e {
            Expr::Int(n) => *n,
            Expr::Var(v) => env[v],
            Expr::Index { array, indices } => {
                let ix: Vec<i64> = indices.iter().map(|i| self.eval(i, env)).collect();
                self.touch(array, &ix);
                0
            }
            Expr::Unary(UnOp::Neg, a) => -self.eval(a, env),
            Expr::Unary(UnOp::Not, a) => (self.eval(a, env) == 0) as i64,
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, env);
                let y = self.eval(b, env);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => if y == 0 { 0 } else { x / y },
                    BinOp::Mod => if y == 0 { 0 } else { x % y },
                    BinOp::Lt => (x < y) as i64,
                    BinOp::Le => (x <= y) as i64,
                    BinOp::Gt => (x > y) as i64,
                    BinOp::Ge => (x >= y) as i64,
                    BinOp::Eq => (x == y) as i64,
                    BinOp::Ne => (x != y) as i64,
                    BinOp::And => (x != 0 && y != 0) as i64,
                    BinOp::Or => (x != 0 || y != 0) as i64,
                }
            }
        }
    }

    fn touch(&mut self, array: &str, ix: &[i64]) {
        if self.cache.iter().any(|c| c == array) {
            let flat = if ix.len() == 2 { ix[0] * self.row[array] + ix[1] } else { ix[0] };
            self.seen.insert((array.to_string(), flat));
        }
    }

    fn exec(&mut self, s: &Stmt, env: &mut Scalars) {
        match &s.kind {
            StmtKind::Block(b) => b.iter().for_each(|s| self.exec(s, env)),
            StmtKind::Decl { name, init: Some(e), .. } => {
                let v = self.eval(e, env);
                env.insert(name.clone(), v);
            }
            StmtKind::Assign { target, value, .. } => {
                let v = self.eval(value, env);
                match target {
                    LValue::Var(n) => {
                        env.insert(n.clone(), v);
                    }
                    LValue::Index { array, indices } => {
                        let ix: Vec<i64> = indices.iter().map(|i| self.eval(i, env)).collect();
                        self.touch(array, &ix);
                    }
                }
            }
            StmtKind::If { cond, then, els } => {
                if self.eval(cond, env) != 0 {
                    self.exec(then, env);
                } else if let Some(e) = els {
                    self.exec(e, env);
                }
            }
            StmtKind::For { var, init, bound, body } => {
                let lo = self.eval(init, env);
                let hi = self.eval(bound, env);
                for k in lo..hi {
                    env.insert(var.clone(), k);
                    self.exec(body, env);
                }
            }
            _ => panic!("oracle does not model {s:?}"),
        }
    }
}

fn top_scalars(g: &SourceCfg, params: &Scalars) -> Scalars {
    let mut env = params.clone();
    for (n, v) in &g.params().constants {
        env.insert(n.clone(), *v);
    }
    for (n, e) in &g.params().derived {
        let mut o = Oracle { cache: &[], row: BTreeMap::new(), seen: BTreeSet::new() };
        let v = o.eval(e, &env);
        env.insert(n.clone(), v);
    }
    env
}

pub fn brute_force_footprint(g: &SourceCfg, params: &Scalars, rng: &mut rand_chacha::ChaCha8Rng) -> i64 {
    let env0 = top_scalars(g, params);
    let row: BTreeMap<String, i64> = g
        .params()
        .arrays
        .iter()
        .filter(|a| a.dims.len() == 2)
        .map(|a| {
            let mut o = Oracle { cache: &[], row: BTreeMap::new(), seen: BTreeSet::new() };
            (a.name.clone(), o.eval(&a.dims[1], &env0))
        })
        .collect();
    let nest = g.nest();
    let mut best = 0;
    // Each value of a context index may select a different branch.
    let contexts: Vec<Scalars> = if g.params().context_vars.is_empty() {
        vec![Scalars::new()]
    } else {
        (0..2).map(|t| g.params().context_vars.iter().map(|v| (v.clone(), t)).collect()).collect()
    };
    for ctx in contexts {
        let mut env = env0.clone();
        env.extend(ctx);
        let mut o = Oracle { cache: g.cache(), row: row.clone(), seen: BTreeSet::new() };
        for l in nest.grid_loops() {
            let hi = o.eval(&l.bound, &env);
            env.insert(l.var.clone(), rng.gen_range(0..hi.max(1)));
        }
        let threads: Vec<_> = nest.thread_loops().cloned().collect();
        let extents: Vec<i64> = threads.iter().map(|l| o.eval(&l.bound, &env)).collect();
        let total: i64 = extents.iter().product();
        for mut n in 0..total {
            for (l, e) in threads.iter().zip(&extents).rev() {
                env.insert(l.var.clone(), n % e);
                n /= e;
            }
            o.exec(&nest.body, &mut env.clone());
        }
        best = best.max(o.seen.len() as i64);
    }
    best
}
