//! CUDA-like kernel text for one case.

use std::fmt::Write;

use super::EmitError;
use crate::algebra::Poly;
use crate::counters::footprint::{self, Layout, Region};
use crate::counters::shared_words_per_block;
use crate::dsl::{expr_to_string, simplify, stmt_to_string, ArrayDecl, Expr, LValue, LoopRole, MetaLoop, Stmt, StmtKind};
use crate::model::SourceCfg;

/// Serial loops with a constant trip count up to this are unrolled.
const UNROLL_LIMIT: i64 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelOptions {
    pub grid_stride: i64,
    /// Machine parameter bounding the shared words of a block, if any.
    pub shared_limit: Option<String>,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions { grid_stride: 256, shared_limit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelText {
    pub name: String,
    /// Macros, guards and device helpers.
    pub preamble: String,
    pub kernel: String,
    /// Host function declaring the launch dimensions and launching.
    pub launch: String,
}

impl KernelText {
    pub fn to_source(&self) -> String {
        format!("{}\n{}\n{}", self.preamble, self.kernel, self.launch)
    }
}

struct Ctx<'a> {
    g: &'a SourceCfg,
    grid: Vec<&'a MetaLoop>,
    /// Scalar kernel arguments in signature order.
    scalars: Vec<String>,
    /// Names a slot function needs: the scalars then the grid indices.
    slot_args: Vec<String>,
    order: Vec<String>,
    cached: Vec<String>,
}

impl Ctx<'_> {
    fn poly(&self, p: &Poly) -> String {
        expr_to_string(&p.to_expr(&self.order))
    }

    fn array(&self, name: &str) -> Option<&ArrayDecl> {
        self.g.params().array(name)
    }

    fn slot_call(&self, array: &str, idx: &str) -> String {
        let mut args = vec![idx.to_string()];
        args.extend(self.slot_args.iter().cloned());
        format!("slot_{array}({})", args.join(", "))
    }

    fn flat(&self, array: &str, indices: &[Expr]) -> Expr {
        let rewritten: Vec<Expr> = indices.iter().map(|i| self.expr(i)).collect();
        let dims = self.array(array).map(|a| a.dims.clone()).unwrap_or_default();
        if rewritten.len() < 2 || dims.len() != rewritten.len() {
            return rewritten.into_iter().next().unwrap_or(Expr::Int(0));
        }
        let mut acc = rewritten[0].clone();
        for (k, ix) in rewritten.iter().enumerate().skip(1) {
            acc = Expr::bin(crate::dsl::BinOp::Add, Expr::bin(crate::dsl::BinOp::Mul, acc, dims[k].clone()), ix.clone());
        }
        simplify(&acc)
    }

    fn access(&self, array: &str, indices: &[Expr]) -> (String, Vec<Expr>) {
        let idx = self.flat(array, indices);
        if self.cached.iter().any(|c| c == array) {
            let call = self.slot_call(array, &expr_to_string(&idx));
            ("shared_mem".into(), vec![Expr::Var(call)])
        } else {
            (array.to_string(), vec![idx])
        }
    }

    fn expr(&self, e: &Expr) -> Expr {
        match e {
            Expr::Int(_) | Expr::Var(_) => e.clone(),
            Expr::Index { array, indices } => {
                let (array, indices) = self.access(array, indices);
                Expr::Index { array, indices }
            }
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(self.expr(a))),
            Expr::Binary(op, a, b) => Expr::bin(*op, self.expr(a), self.expr(b)),
        }
    }

    fn stmt(&self, s: &Stmt) -> Stmt {
        let kind = match &s.kind {
            StmtKind::Assign { target: LValue::Index { array, indices }, op, value } => {
                let (array, indices) = self.access(array, indices);
                StmtKind::Assign {
                    target: LValue::Index { array, indices },
                    op: *op,
                    value: self.expr(value),
                }
            }
            StmtKind::Assign { target, op, value } => StmtKind::Assign {
                target: target.clone(),
                op: *op,
                value: self.expr(value),
            },
            StmtKind::Decl { is_const, name, dims, init } => StmtKind::Decl {
                is_const: *is_const,
                name: name.clone(),
                dims: dims.clone(),
                init: init.as_ref().map(|e| self.expr(e)),
            },
            StmtKind::For { var, init, bound, body } => {
                if let Some(copies) = self.unroll(var, init, bound, body) {
                    return Stmt::block(copies.iter().map(|c| self.stmt(c)).collect());
                }
                StmtKind::For {
                    var: var.clone(),
                    init: self.expr(init),
                    bound: self.expr(bound),
                    body: Box::new(self.stmt(body)),
                }
            }
            StmtKind::While { cond, body } => StmtKind::While {
                cond: self.expr(cond),
                body: Box::new(self.stmt(body)),
            },
            StmtKind::If { cond, then, els } => StmtKind::If {
                cond: self.expr(cond),
                then: Box::new(self.stmt(then)),
                els: els.as_ref().map(|e| Box::new(self.stmt(e))),
            },
            StmtKind::Block(v) => StmtKind::Block(v.iter().map(|x| self.stmt(x)).collect()),
            StmtKind::Assert(e) => StmtKind::Assert(self.expr(e)),
            k @ (StmtKind::MetaFor { .. } | StmtKind::MetaSchedule { .. }) => k.clone(),
        };
        Stmt { kind, span: s.span }
    }

    /// Copies of `body` with `var` replaced by each value of a short
    /// constant-bound loop.
    fn unroll(&self, var: &str, init: &Expr, bound: &Expr, body: &Stmt) -> Option<Vec<Stmt>> {
        let p = self.g.params();
        let (Expr::Int(lo), Expr::Int(hi)) = (p.expand_all(init), p.expand_all(bound)) else {
            return None;
        };
        if hi - lo > UNROLL_LIMIT {
            return None;
        }
        let mut assigned = false;
        body.walk(&mut |s| match &s.kind {
            StmtKind::Assign { target: LValue::Var(v), .. } => assigned |= v == var,
            StmtKind::Decl { name, .. } | StmtKind::For { var: name, .. } => assigned |= name == var,
            _ => {}
        });
        if assigned {
            return None;
        }
        Some(
            (lo..hi)
                .map(|k| {
                    let copy = body.map_exprs(&|e| simplify(&e.substitute(&|v| (v == var).then_some(Expr::Int(k)))));
                    match copy.kind {
                        StmtKind::Block(_) => copy,
                        _ => Stmt::block(vec![copy]),
                    }
                })
                .collect(),
        )
    }
}

/// Wraps `s` in parentheses unless it is a single name or number.
fn atom(s: &str) -> String {
    if s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        s.to_string()
    } else {
        format!("({s})")
    }
}

fn indent(text: &str, by: usize) -> String {
    let pad = "  ".repeat(by);
    text.lines()
        .map(|l| if l.is_empty() { "\n".to_string() } else { format!("{pad}{l}\n") })
        .collect()
}

/// Thread or block index names for a split of at most two loops,
/// innermost on x.
fn axes(n: usize) -> &'static [&'static str] {
    match n {
        0 => &[],
        1 => &["x"],
        _ => &["y", "x"],
    }
}

fn dim3(bounds: &[String]) -> String {
    match bounds.len() {
        0 => "1".into(),
        1 => bounds[0].clone(),
        _ => format!("{}, {}", bounds[1], bounds[0]),
    }
}

fn conds_text(l: &Layout) -> Option<String> {
    if l.conds.is_empty() {
        return None;
    }
    let parts: Vec<String> = l
        .conds
        .iter()
        .rev()
        .map(|(c, taken)| {
            let c = expr_to_string(c);
            match (taken, l.conds.len()) {
                (true, 1) => c,
                (true, _) => format!("({c})"),
                (false, _) => format!("!({c})"),
            }
        })
        .collect();
    Some(parts.join(" && "))
}

struct Placed<'a> {
    region: &'a Region,
    offset: Poly,
}

fn placed(l: &Layout) -> Vec<Placed<'_>> {
    let mut offset = Poly::zero();
    l.regions
        .iter()
        .map(|r| {
            let p = Placed { region: r, offset: offset.clone() };
            offset = offset.clone() + r.size();
            p
        })
        .collect()
}

fn slot_function(cx: &Ctx, array: &str, layouts: &[Layout]) -> String {
    let mut out = String::new();
    let mut sig = vec!["int idx".to_string()];
    sig.extend(cx.slot_args.iter().map(|a| format!("int {a}")));
    let _ = writeln!(out, "__device__ int slot_{array}({}) {{", sig.join(", "));
    out.push_str("  int rel;\n");
    for l in layouts {
        let mut body = String::new();
        for p in placed(l).iter().filter(|p| p.region.array == array) {
            let r = p.region;
            let start = r.base.clone() + Poly::int(r.lo);
            let dim = |k: usize| {
                r.dims
                    .get(k)
                    .map(|(s, e)| (cx.poly(s), cx.poly(e)))
                    .unwrap_or_else(|| ("0".into(), "1".into()))
            };
            let ((s1, e1), (s2, e2)) = (dim(0), dim(1));
            let _ = writeln!(
                body,
                "rel = cache_slot(idx - ({}), {}, {s1}, {e1}, {s2}, {e2});",
                cx.poly(&start),
                cx.poly(&r.width)
            );
            let _ = writeln!(body, "if (rel >= 0)\n  return {} + rel;", cx.poly(&p.offset));
        }
        if body.is_empty() {
            continue;
        }
        match conds_text(l) {
            Some(c) => {
                let _ = writeln!(out, "  if ({c}) {{");
                out.push_str(&indent(&body, 2));
                out.push_str("  }\n");
            }
            None => out.push_str(&indent(&body, 1)),
        }
    }
    out.push_str("  assert(0);\n  return 0;\n}\n");
    out
}

/// Cooperative copy loops of one layout, `store` choosing the direction.
fn copy_loops(cx: &Ctx, l: &Layout, store: bool) -> String {
    let mut out = String::new();
    for p in placed(l) {
        let r = p.region;
        if store && !r.written {
            continue;
        }
        let size = cx.poly(&r.size());
        let start = cx.poly(&(r.base.clone() + Poly::int(r.lo)));
        let w = cx.poly(&r.width);
        let off = cx.poly(&p.offset);
        let w = atom(&w);
        let idx = match r.dims.as_slice() {
            [] => format!("{start} + cache_k"),
            [(s1, _)] => format!("{start} + cache_k % {w} + cache_k / {w} * {}", atom(&cx.poly(s1))),
            [(s1, e1), (s2, _)] => {
                let e = atom(&cx.poly(e1));
                format!(
                    "{start} + cache_k % {w} + cache_k / {w} % {e} * {} + cache_k / {w} / {e} * {}",
                    atom(&cx.poly(s1)),
                    atom(&cx.poly(s2))
                )
            }
            _ => unreachable!("at most two strided dimensions"),
        };
        let len = cx
            .array(&r.array)
            .map(|a| {
                let parts: Vec<String> = a.dims.iter().map(|d| atom(&expr_to_string(d))).collect();
                parts.join(" * ")
            })
            .unwrap_or_else(|| "1".into());
        let _ = writeln!(out, "for (int cache_k = tid; cache_k < {size}; cache_k += nthreads) {{");
        let _ = writeln!(out, "  int cache_idx = {idx};");
        if store {
            let _ = writeln!(
                out,
                "  if (0 <= cache_idx && cache_idx < {len} && {} == {off} + cache_k)",
                cx.slot_call(&r.array, "cache_idx")
            );
            let _ = writeln!(out, "    {}[cache_idx] = shared_mem[{off} + cache_k];", r.array);
        } else {
            let _ = writeln!(out, "  if (0 <= cache_idx && cache_idx < {len})");
            let _ = writeln!(out, "    shared_mem[{off} + cache_k] = {}[cache_idx];", r.array);
        }
        out.push_str("}\n");
    }
    match conds_text(l) {
        Some(c) if !out.is_empty() => format!("if ({c}) {{\n{}}}\n", indent(&out, 1)),
        _ => out,
    }
}

/// Renders the kernel of one case. `name` is the kernel function name.
pub fn emit_kernel(g: &SourceCfg, name: &str, opts: &KernelOptions) -> Result<KernelText, EmitError> {
    let p = g.params();
    let grid: Vec<&MetaLoop> = g.meta_loops().iter().filter(|l| l.role == LoopRole::Grid).collect();
    let threads: Vec<&MetaLoop> = g.meta_loops().iter().filter(|l| l.role == LoopRole::Thread).collect();
    if grid.len() > 2 || threads.len() > 2 {
        return Err(EmitError::TooDeep { grid: grid.len(), thread: threads.len() });
    }
    let mut scalars: Vec<String> = p.data_params.clone();
    scalars.extend(p.program_params.iter().cloned());
    scalars.extend(p.context_vars.iter().cloned());
    let mut slot_args = scalars.clone();
    slot_args.extend(grid.iter().map(|l| l.var.clone()));
    let mut order = slot_args.clone();
    order.extend(threads.iter().map(|l| l.var.clone()));
    let cx = Ctx {
        g,
        grid: grid.clone(),
        scalars,
        slot_args,
        order,
        cached: g.cache().to_vec(),
    };
    let layouts = if cx.cached.is_empty() { Vec::new() } else { footprint::layouts(g)? };
    for r in layouts.iter().flat_map(|l| &l.regions) {
        if r.dims.len() > 2 {
            return Err(EmitError::CacheShape(r.array.clone()));
        }
    }

    let mut pre = String::new();
    pre.push_str("#include <assert.h>\n\n");
    let _ = writeln!(pre, "#define GRID_STRIDE {}", opts.grid_stride);
    pre.push_str("#define GRID_CAP(x) ((x) < GRID_STRIDE ? (x) : GRID_STRIDE)\n");
    if !cx.cached.is_empty() {
        let words = shared_words_per_block(g)?;
        let words = words.value.as_poly().cloned().unwrap_or_else(Poly::zero);
        pre.push('\n');
        if let Some(z) = &opts.shared_limit {
            let _ = writeln!(pre, "#ifndef {z}\n#error \"define {z}, the shared words available per block\"\n#endif");
        }
        let _ = writeln!(pre, "#define SHARED_WORDS ({})", cx.poly(&words));
        pre.push_str(
            "\n__device__ __forceinline__ int cache_slot(int rel, int w0, int s1, int e1, int s2, int e2) {\n\
             \x20 if (rel < 0)\n    return -1;\n\
             \x20 int x2 = 0;\n  int x1 = 0;\n\
             \x20 if (s2 > 0) {\n    x2 = min(rel / s2, e2 - 1);\n    rel -= x2 * s2;\n  }\n\
             \x20 if (s1 > 0) {\n    x1 = min(rel / s1, e1 - 1);\n    rel -= x1 * s1;\n  }\n\
             \x20 if (rel >= w0)\n    return -1;\n\
             \x20 return rel + w0 * (x1 + e1 * x2);\n}\n",
        );
        for a in &cx.cached {
            pre.push('\n');
            pre.push_str(&slot_function(&cx, a, &layouts));
        }
    }

    let arrays: Vec<&ArrayDecl> = p.arrays.iter().collect();
    let mut formals: Vec<String> = arrays.iter().map(|a| format!("int *{}", a.name)).collect();
    formals.extend(cx.scalars.iter().map(|s| format!("int {s}")));
    let actuals: Vec<String> = arrays.iter().map(|a| a.name.clone()).chain(cx.scalars.iter().cloned()).collect();

    let mut k = String::new();
    let _ = writeln!(k, "__global__ void {name}({}) {{", formals.join(", "));
    if !cx.cached.is_empty() {
        k.push_str("  extern __shared__ int shared_mem[];\n");
    }
    for (c, v) in &p.constants {
        let _ = writeln!(k, "  const int {c} = {v};");
    }
    for (d, e) in &p.derived {
        let _ = writeln!(k, "  int {d} = {};", expr_to_string(e));
    }
    for (l, axis) in threads.iter().zip(axes(threads.len())) {
        let _ = writeln!(k, "  int {} = threadIdx.{axis};", l.var);
    }
    if !cx.cached.is_empty() {
        if threads.len() == 2 {
            k.push_str("  int tid = threadIdx.y * blockDim.x + threadIdx.x;\n");
            k.push_str("  int nthreads = blockDim.x * blockDim.y;\n");
        } else {
            k.push_str("  int tid = threadIdx.x;\n  int nthreads = blockDim.x;\n");
        }
    }
    for a in &p.asserts {
        let _ = writeln!(k, "  assert({});", expr_to_string(a));
    }
    if !cx.cached.is_empty() {
        if let Some(z) = &opts.shared_limit {
            let _ = writeln!(k, "  assert(SHARED_WORDS <= {z});");
        }
    }

    let mut depth = 1;
    for (l, axis) in cx.grid.iter().zip(axes(cx.grid.len())) {
        let pad = "  ".repeat(depth);
        let _ = writeln!(
            k,
            "{pad}for (int {v} = blockIdx.{axis}; {v} < {}; {v} += GRID_STRIDE) {{",
            expr_to_string(&l.bound),
            v = l.var
        );
        depth += 1;
    }
    let mut inner = String::new();
    if !cx.cached.is_empty() {
        for l in &layouts {
            inner.push_str(&copy_loops(&cx, l, false));
        }
        inner.push_str("__syncthreads();\n");
    }
    let body = cx.stmt(&g.nest().body);
    let body = match body.kind {
        StmtKind::Block(_) => body,
        _ => Stmt::block(vec![body]),
    };
    inner.push_str(&stmt_to_string(&body, 0));
    if !cx.cached.is_empty() {
        inner.push_str("__syncthreads();\n");
        for l in &layouts {
            inner.push_str(&copy_loops(&cx, l, true));
        }
        inner.push_str("__syncthreads();\n");
    }
    k.push_str(&indent(&inner, depth));
    for d in (1..depth).rev() {
        let _ = writeln!(k, "{}}}", "  ".repeat(d));
    }
    k.push_str("}\n");

    let bound = |l: &&MetaLoop| expr_to_string(&p.expand_all(&l.bound));
    let grid_dims: Vec<String> = cx.grid.iter().map(|l| format!("GRID_CAP({})", bound(l))).collect();
    let block_dims: Vec<String> = threads.iter().map(bound).collect();
    let mut launch = String::new();
    let _ = writeln!(launch, "void {name}_launch({}) {{", formals.join(", "));
    let _ = writeln!(launch, "  dim3 dimBlock({});", dim3(&block_dims));
    let _ = writeln!(launch, "  dim3 dimGrid({});", dim3(&grid_dims));
    let shmem = if cx.cached.is_empty() { String::new() } else { ", SHARED_WORDS * sizeof(int)".into() };
    let _ = writeln!(launch, "  {name}<<<dimGrid, dimBlock{shmem}>>>({});", actuals.join(", "));
    launch.push_str("}\n");

    Ok(KernelText { name: name.to_string(), preamble: pre, kernel: k, launch })
}
