//! Lowering of the thread body to IR.

use std::collections::BTreeMap;

use crate::dsl::{fold_binop, simplify, BinOp, Expr, LValue, StmtKind, UnOp};

use super::ir::*;
use super::liveness::compute_liveness;
use super::source_cfg::{SourceCfg, SrcTerm};

/// The base lowering: one virtual register per variable, inputs read at the
/// top of the entry block, dead pure instructions removed.
pub fn lower_base(g: &SourceCfg) -> IrCfg {
    let mut l = Lowerer {
        g,
        ir: IrCfg {
            blocks: vec![IrBlock::new()],
            entry: 0,
            next_reg: 0,
        },
        homes: BTreeMap::new(),
        inputs: Vec::new(),
        temps: std::collections::BTreeSet::new(),
    };
    let cached = !g.cache().is_empty();
    let end = l.region(g.entry, None, 0);
    if cached {
        l.ir.blocks[end].push(Inst::Sync(SyncKind::CacheOut), None);
    }
    l.ir.blocks[end].term = Term::Return;
    let mut head: Vec<Inst> = l
        .inputs
        .iter()
        .map(|(name, r)| Inst::LoadParam {
            dst: *r,
            name: name.clone(),
        })
        .collect();
    if cached {
        head.push(Inst::Sync(SyncKind::CacheIn));
    }
    let n = head.len();
    let b0 = &mut l.ir.blocks[0];
    b0.insts.splice(0..0, head);
    b0.origins.splice(0..0, std::iter::repeat_n(None, n));
    let mut ir = l.ir;
    local_single_assignment(&mut ir);
    copy_propagation(&mut ir);
    dead_code_elimination(&mut ir);
    ir
}

struct Lowerer<'a> {
    g: &'a SourceCfg,
    ir: IrCfg,
    /// Home registers of body locals and serial loop indices.
    homes: BTreeMap<String, Reg>,
    inputs: Vec<(String, Reg)>,
    /// Registers holding expression temporaries.
    temps: std::collections::BTreeSet<Reg>,
}

impl Lowerer<'_> {
    fn new_block(&mut self) -> BlockId {
        self.ir.blocks.push(IrBlock::new());
        self.ir.blocks.len() - 1
    }

    fn emit(&mut self, b: BlockId, i: Inst, o: Origin) {
        self.ir.blocks[b].push(i, o);
    }

    fn temp(&mut self) -> Reg {
        let r = self.ir.fresh();
        self.temps.insert(r);
        r
    }

    fn home(&mut self, name: &str) -> Reg {
        if let Some(r) = self.homes.get(name) {
            return *r;
        }
        let r = self.ir.fresh();
        self.homes.insert(name.to_string(), r);
        r
    }

    fn is_local(&self, name: &str) -> bool {
        self.homes.contains_key(name)
    }

    fn input(&mut self, name: &str) -> Reg {
        if let Some((_, r)) = self.inputs.iter().find(|(n, _)| n == name) {
            return *r;
        }
        let r = self.ir.fresh();
        self.inputs.push((name.to_string(), r));
        r
    }

    fn region(&mut self, mut b: usize, stop: Option<usize>, mut cur: BlockId) -> BlockId {
        let g = self.g;
        loop {
            if Some(b) == stop {
                return cur;
            }
            let blk = &g.blocks[b];
            for (k, s) in blk.stmts.iter().enumerate() {
                self.stmt(&s.kind, &mut cur, Some((b, k)));
            }
            match &blk.term {
                SrcTerm::Jump(n) => b = *n,
                SrcTerm::Branch {
                    cond,
                    then,
                    els,
                    join,
                } => {
                    let c = self.expr(cond, &mut cur, None);
                    let t = self.new_block();
                    let e = (els != join).then(|| self.new_block());
                    let j = self.new_block();
                    self.ir.blocks[cur].term = Term::Branch {
                        cond: c,
                        then: t,
                        els: e.unwrap_or(j),
                    };
                    let t_end = self.region(*then, Some(*join), t);
                    self.ir.blocks[t_end].term = Term::Jump(j);
                    if let Some(e) = e {
                        let e_end = self.region(*els, Some(*join), e);
                        self.ir.blocks[e_end].term = Term::Jump(j);
                    }
                    cur = j;
                    b = *join;
                }
                SrcTerm::Loop {
                    var,
                    init,
                    bound,
                    body,
                    exit,
                } => {
                    let k = self.home(var);
                    let v = self.expr(init, &mut cur, None);
                    self.assign_to(k, v, cur, None);
                    let mut h = self.new_block();
                    self.ir.blocks[cur].term = Term::Jump(h);
                    let header = h;
                    let bv = self.expr(bound, &mut h, None);
                    let c = self.temp();
                    self.emit(h, Inst::Bin { dst: c, op: IrOp::Lt, a: Operand::Reg(k), b: bv }, None);
                    let body_ir = self.new_block();
                    let exit_ir = self.new_block();
                    self.ir.blocks[h].term = Term::Branch {
                        cond: Operand::Reg(c),
                        then: body_ir,
                        els: exit_ir,
                    };
                    let latch = self.region(*body, Some(b), body_ir);
                    self.emit(
                        latch,
                        Inst::Bin { dst: k, op: IrOp::Add, a: Operand::Reg(k), b: Operand::Imm(1) },
                        None,
                    );
                    self.ir.blocks[latch].term = Term::Jump(header);
                    cur = exit_ir;
                    b = *exit;
                }
                SrcTerm::While { cond, body, exit } => {
                    let mut h = self.new_block();
                    self.ir.blocks[cur].term = Term::Jump(h);
                    let header = h;
                    let c = self.expr(cond, &mut h, None);
                    let body_ir = self.new_block();
                    let exit_ir = self.new_block();
                    self.ir.blocks[h].term = Term::Branch {
                        cond: c,
                        then: body_ir,
                        els: exit_ir,
                    };
                    let latch = self.region(*body, Some(b), body_ir);
                    self.ir.blocks[latch].term = Term::Jump(header);
                    cur = exit_ir;
                    b = *exit;
                }
                SrcTerm::Exit => return cur,
            }
        }
    }

    fn stmt(&mut self, s: &StmtKind, cur: &mut BlockId, o: Origin) {
        match s {
            StmtKind::Decl { name, init, .. } => {
                let h = self.home(name);
                if let Some(e) = init {
                    let v = self.expr(e, cur, o);
                    self.assign_to(h, v, *cur, o);
                }
            }
            StmtKind::Assign { target, op, value } => match target {
                LValue::Var(name) => {
                    let h = self.home(name);
                    let v = self.expr(value, cur, o);
                    match op.bin_op() {
                        None => self.assign_to(h, v, *cur, o),
                        Some(bop) => self.emit(
                            *cur,
                            Inst::Bin { dst: h, op: ir_op(bop), a: Operand::Reg(h), b: v },
                            o,
                        ),
                    }
                }
                LValue::Index { array, indices } => {
                    let idx = self.index(array, indices, cur, o);
                    let mut v = self.expr(value, cur, o);
                    if let Some(bop) = op.bin_op() {
                        let old = self.temp();
                        self.emit(*cur, Inst::Load { dst: old, array: array.clone(), index: idx }, o);
                        v = self.bin(ir_op(bop), Operand::Reg(old), v, *cur, o);
                    }
                    self.emit(*cur, Inst::Store { array: array.clone(), index: idx, value: v }, o);
                }
            },
            StmtKind::Assert(_) => {}
            _ => unreachable!("structured statements are graph edges"),
        }
    }

    /// Writes `v` into `h`, retargeting the instruction that just produced
    /// `v` when it is a fresh temporary.
    fn assign_to(&mut self, h: Reg, v: Operand, b: BlockId, o: Origin) {
        if let Operand::Reg(r) = v {
            if self.temps.contains(&r) {
                let blk = &mut self.ir.blocks[b];
                if let Some(last) = blk.insts.last_mut() {
                    if last.def() == Some(r) {
                        match last {
                            Inst::Bin { dst, .. } | Inst::Load { dst, .. } | Inst::Copy { dst, .. } => {
                                *dst = h;
                                self.temps.remove(&r);
                                return;
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        self.emit(b, Inst::Copy { dst: h, src: v }, o);
    }

    fn bin(&mut self, op: IrOp, a: Operand, b: Operand, blk: BlockId, o: Origin) -> Operand {
        if let (Operand::Imm(x), Operand::Imm(y)) = (a, b) {
            if let Some(v) = fold_binop(bin_op(op), x, y) {
                return Operand::Imm(v);
            }
        }
        let d = self.temp();
        self.emit(blk, Inst::Bin { dst: d, op, a, b }, o);
        Operand::Reg(d)
    }

    fn index(&mut self, array: &str, indices: &[Expr], cur: &mut BlockId, o: Origin) -> Operand {
        let i0 = self.expr(&indices[0], cur, o);
        if indices.len() == 1 {
            return i0;
        }
        let dims = self
            .g
            .params()
            .array(array)
            .map(|a| a.dims.clone())
            .unwrap_or_default();
        let row = dims.get(1).cloned().unwrap_or(Expr::Int(1));
        let rl = self.expr(&row, cur, o);
        let m = self.bin(IrOp::Mul, i0, rl, *cur, o);
        let i1 = self.expr(&indices[1], cur, o);
        self.bin(IrOp::Add, m, i1, *cur, o)
    }

    fn expr(&mut self, e: &Expr, cur: &mut BlockId, o: Origin) -> Operand {
        let e = simplify(e);
        self.lower(&e, cur, o)
    }

    fn lower(&mut self, e: &Expr, cur: &mut BlockId, o: Origin) -> Operand {
        match e {
            Expr::Int(n) => Operand::Imm(*n),
            Expr::Var(v) => {
                if self.is_local(v) {
                    return Operand::Reg(self.homes[v]);
                }
                let t = self.g.params();
                if let Some(c) = t.constant(v) {
                    return Operand::Imm(c);
                }
                if let Some(d) = t.derived(v) {
                    let d = simplify(d);
                    return self.lower(&d, cur, o);
                }
                Operand::Reg(self.input(v))
            }
            Expr::Index { array, indices } => {
                let idx = self.index(array, indices, cur, o);
                let d = self.temp();
                self.emit(*cur, Inst::Load { dst: d, array: array.clone(), index: idx }, o);
                Operand::Reg(d)
            }
            Expr::Unary(UnOp::Neg, x) => {
                let x = self.lower(x, cur, o);
                self.bin(IrOp::Sub, Operand::Imm(0), x, *cur, o)
            }
            Expr::Unary(UnOp::Not, x) => {
                let x = self.lower(x, cur, o);
                self.bin(IrOp::Eq, x, Operand::Imm(0), *cur, o)
            }
            Expr::Binary(op @ (BinOp::And | BinOp::Or), a, b) if has_load(b) => {
                // short-circuit so the right operand's loads only run when needed
                let x = self.lower(a, cur, o);
                let r = self.temp();
                let xb = self.bin(IrOp::Ne, x, Operand::Imm(0), *cur, o);
                self.emit(*cur, Inst::Copy { dst: r, src: xb }, o);
                let rhs = self.new_block();
                let join = self.new_block();
                let (then, els) = if *op == BinOp::And { (rhs, join) } else { (join, rhs) };
                self.ir.blocks[*cur].term = Term::Branch { cond: Operand::Reg(r), then, els };
                let mut rb = rhs;
                let y = self.lower(b, &mut rb, o);
                let yb = self.bin(IrOp::Ne, y, Operand::Imm(0), rb, o);
                self.emit(rb, Inst::Copy { dst: r, src: yb }, o);
                self.ir.blocks[rb].term = Term::Jump(join);
                *cur = join;
                Operand::Reg(r)
            }
            Expr::Binary(op, a, b) => {
                let x = self.lower(a, cur, o);
                let y = self.lower(b, cur, o);
                self.bin(ir_op(*op), x, y, *cur, o)
            }
        }
    }
}

fn has_load(e: &Expr) -> bool {
    let mut any = false;
    e.visit_loads(&mut |_, _| any = true);
    any
}

pub fn ir_op(op: BinOp) -> IrOp {
    match op {
        BinOp::Add => IrOp::Add,
        BinOp::Sub => IrOp::Sub,
        BinOp::Mul => IrOp::Mul,
        BinOp::Div => IrOp::Div,
        BinOp::Mod => IrOp::Mod,
        BinOp::Lt => IrOp::Lt,
        BinOp::Le => IrOp::Le,
        BinOp::Gt => IrOp::Gt,
        BinOp::Ge => IrOp::Ge,
        BinOp::Eq => IrOp::Eq,
        BinOp::Ne => IrOp::Ne,
        BinOp::And => IrOp::And,
        BinOp::Or => IrOp::Or,
    }
}

pub fn bin_op(op: IrOp) -> BinOp {
    match op {
        IrOp::Add => BinOp::Add,
        IrOp::Sub => BinOp::Sub,
        IrOp::Mul => BinOp::Mul,
        IrOp::Div => BinOp::Div,
        IrOp::Mod => BinOp::Mod,
        IrOp::Lt => BinOp::Lt,
        IrOp::Le => BinOp::Le,
        IrOp::Gt => BinOp::Gt,
        IrOp::Ge => BinOp::Ge,
        IrOp::Eq => BinOp::Eq,
        IrOp::Ne => BinOp::Ne,
        IrOp::And => BinOp::And,
        IrOp::Or => BinOp::Or,
    }
}

/// Renames all but the last definition of a register inside each block so
/// every register is assigned at most once per block.
pub fn local_single_assignment(ir: &mut IrCfg) {
    for b in 0..ir.blocks.len() {
        let mut last_def: BTreeMap<Reg, usize> = BTreeMap::new();
        for (i, inst) in ir.blocks[b].insts.iter().enumerate() {
            if let Some(d) = inst.def() {
                last_def.insert(d, i);
            }
        }
        let mut current: BTreeMap<Reg, Reg> = BTreeMap::new();
        for i in 0..ir.blocks[b].insts.len() {
            let mut inst = ir.blocks[b].insts[i].clone();
            inst.map_uses(&mut |r| Operand::Reg(*current.get(&r).unwrap_or(&r)));
            if let Some(d) = inst.def() {
                if last_def[&d] == i {
                    current.remove(&d);
                } else {
                    let n = ir.fresh();
                    set_def(&mut inst, n);
                    current.insert(d, n);
                }
            }
            ir.blocks[b].insts[i] = inst;
        }
        if let Term::Branch { cond: Operand::Reg(r), .. } = &mut ir.blocks[b].term {
            if let Some(n) = current.get(r) {
                *r = *n;
            }
        }
    }
}

pub fn set_def(inst: &mut Inst, r: Reg) {
    match inst {
        Inst::LoadParam { dst, .. }
        | Inst::Copy { dst, .. }
        | Inst::Bin { dst, .. }
        | Inst::Load { dst, .. }
        | Inst::Reload { dst, .. } => *dst = r,
        _ => {}
    }
}

/// Removes pure instructions and loads whose result is never used.
pub fn dead_code_elimination(ir: &mut IrCfg) {
    loop {
        let live = compute_liveness(ir);
        let mut changed = false;
        for (b, blk) in ir.blocks.iter_mut().enumerate() {
            let after = live.live_after(b);
            let mut keep_i = Vec::with_capacity(blk.insts.len());
            for (i, inst) in blk.insts.iter().enumerate() {
                let removable = inst.is_pure() || matches!(inst, Inst::Load { .. });
                let dead = inst.def().is_some_and(|d| !after[i].contains(&d));
                keep_i.push(!(removable && dead));
            }
            if keep_i.iter().any(|k| !k) {
                changed = true;
                let mut it = keep_i.iter();
                blk.insts.retain(|_| *it.next().unwrap());
                let mut it = keep_i.iter();
                blk.origins.retain(|_| *it.next().unwrap());
            }
        }
        if !changed {
            return;
        }
    }
}

/// Forwards copies whose destination is assigned exactly once: constants
/// everywhere, registers when the source is itself assigned once, earlier
/// in the same block.
pub fn copy_propagation(ir: &mut IrCfg) {
    loop {
        let mut defs: BTreeMap<Reg, Vec<(BlockId, usize)>> = BTreeMap::new();
        for (b, blk) in ir.blocks.iter().enumerate() {
            for (i, inst) in blk.insts.iter().enumerate() {
                if let Some(d) = inst.def() {
                    defs.entry(d).or_default().push((b, i));
                }
            }
        }
        let single = |r: &Reg| defs.get(r).filter(|v| v.len() == 1).map(|v| v[0]);
        let mut found = None;
        'scan: for (b, blk) in ir.blocks.iter().enumerate() {
            for (i, inst) in blk.insts.iter().enumerate() {
                let Inst::Copy { dst, src } = inst else { continue };
                if single(dst).is_none() {
                    continue;
                }
                let ok = match src {
                    Operand::Imm(_) => true,
                    Operand::Reg(s) => single(s).is_some_and(|(sb, si)| sb == b && si < i),
                };
                if ok {
                    found = Some((b, i, *dst, *src));
                    break 'scan;
                }
            }
        }
        let Some((b, i, d, src)) = found else { return };
        ir.blocks[b].insts.remove(i);
        ir.blocks[b].origins.remove(i);
        for blk in &mut ir.blocks {
            for inst in &mut blk.insts {
                inst.map_uses(&mut |r| if r == d { src } else { Operand::Reg(r) });
            }
            if let Term::Branch { cond, .. } = &mut blk.term {
                if *cond == Operand::Reg(d) {
                    *cond = src;
                }
            }
        }
    }
}
