//! Register-pressure reduction on the IR.
//!
//! Level 0 sinks pure instructions towards their first use. Level 1 also
//! recomputes cheap values (inputs, constants, arithmetic over inputs) at
//! each use instead of keeping them live. Level 2 also spills values that
//! are live across a loop but unused inside it. A level never returns an IR
//! with a higher maxlive than its input.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::ir::BlockId;
use crate::model::{compute_liveness, Inst, IrCfg, Operand, Reg, Term};

pub fn reduce_register_pressure(ir: &IrCfg, level: u8) -> IrCfg {
    let mut out = ir.clone();
    sink(&mut out);
    if level >= 1 {
        rematerialize(&mut out);
        sink(&mut out);
    }
    if level >= 2 {
        spill_across_loops(&mut out);
    }
    if compute_liveness(&out).maxlive > compute_liveness(ir).maxlive {
        return ir.clone();
    }
    out
}

fn def_sites(ir: &IrCfg) -> BTreeMap<Reg, Vec<(BlockId, usize)>> {
    let mut defs: BTreeMap<Reg, Vec<(BlockId, usize)>> = BTreeMap::new();
    for (b, blk) in ir.blocks.iter().enumerate() {
        for (i, inst) in blk.insts.iter().enumerate() {
            if let Some(d) = inst.def() {
                defs.entry(d).or_default().push((b, i));
            }
        }
    }
    defs
}

fn use_count(ir: &IrCfg) -> BTreeMap<Reg, usize> {
    let mut n: BTreeMap<Reg, usize> = BTreeMap::new();
    for blk in &ir.blocks {
        for r in blk.insts.iter().flat_map(Inst::uses).chain(blk.term.uses()) {
            *n.entry(r).or_default() += 1;
        }
    }
    n
}

/// Moves each pure instruction down to just before the first instruction
/// that reads its result or writes one of its registers, and from there
/// into the sole successor that needs it when that successor has no other
/// predecessor.
fn sink(ir: &mut IrCfg) {
    loop {
        let mut changed = false;
        for b in 0..ir.blocks.len() {
            changed |= sink_in_block(ir, b);
        }
        changed |= sink_across(ir);
        if !changed {
            return;
        }
    }
}

/// Reorders a block so every pure instruction sits as late as its
/// dependences allow. Built back to front: among the instructions whose
/// dependents are all placed, pure ones go first, later ones first.
#[allow(clippy::needless_range_loop)]
fn sink_in_block(ir: &mut IrCfg, b: BlockId) -> bool {
    let blk = &ir.blocks[b];
    let n = blk.insts.len();
    // after[i]: instructions that must stay after i.
    let mut after: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut last_fixed: Option<usize> = None;
    for j in 0..n {
        let uj = blk.insts[j].uses();
        let dj = blk.insts[j].def();
        for i in 0..j {
            let ui = blk.insts[i].uses();
            let di = blk.insts[i].def();
            let flow = di.is_some_and(|d| uj.contains(&d));
            let anti = dj.is_some_and(|d| ui.contains(&d));
            let output = di.is_some() && di == dj;
            if flow || anti || output {
                after[i].push(j);
            }
        }
        if !blk.insts[j].is_pure() {
            if let Some(f) = last_fixed {
                after[f].push(j);
            }
            last_fixed = Some(j);
        }
    }
    let mut placed = vec![false; n];
    let mut rev: Vec<usize> = Vec::with_capacity(n);
    while rev.len() < n {
        let ready = |i: usize| !placed[i] && after[i].iter().all(|&j| placed[j]);
        let pick = (0..n)
            .rev()
            .find(|&i| ready(i) && blk.insts[i].is_pure())
            .or_else(|| (0..n).rev().find(|&i| ready(i)))
            .expect("dependences follow program order");
        placed[pick] = true;
        rev.push(pick);
    }
    rev.reverse();
    if rev.iter().enumerate().all(|(k, &i)| k == i) {
        return false;
    }
    let blk = &mut ir.blocks[b];
    let insts: Vec<Inst> = rev.iter().map(|&i| blk.insts[i].clone()).collect();
    let origins = rev.iter().map(|&i| blk.origins[i]).collect();
    blk.insts = insts;
    blk.origins = origins;
    true
}

fn sink_across(ir: &mut IrCfg) -> bool {
    let live = compute_liveness(ir);
    let preds = ir.preds();
    for b in 0..ir.blocks.len() {
        let Some(last) = ir.blocks[b].insts.len().checked_sub(1) else {
            continue;
        };
        let inst = &ir.blocks[b].insts[last];
        let Some(d) = inst.def() else { continue };
        if !inst.is_pure() || ir.blocks[b].term.uses().contains(&d) {
            continue;
        }
        let succs = ir.blocks[b].term.successors();
        let needing: Vec<BlockId> = succs.iter().copied().filter(|s| live.live_in[*s].contains(&d)).collect();
        let [s] = needing[..] else { continue };
        if s == b || preds[s] != [b] {
            continue;
        }
        let inst = ir.blocks[b].insts.remove(last);
        let origin = ir.blocks[b].origins.remove(last);
        ir.blocks[s].insts.insert(0, inst);
        ir.blocks[s].origins.insert(0, origin);
        return true;
    }
    false
}

/// Cheap to recompute: an input read, a constant, or arithmetic over those.
fn rematerializable(inst: &Inst, inputs: &BTreeSet<Reg>) -> bool {
    let simple = |o: &Operand| match o {
        Operand::Imm(_) => true,
        Operand::Reg(r) => inputs.contains(r),
    };
    match inst {
        Inst::LoadParam { .. } => true,
        Inst::Copy { src: Operand::Imm(_), .. } => true,
        Inst::Bin { a, b, .. } => simple(a) && simple(b),
        _ => false,
    }
}

fn rematerialize(ir: &mut IrCfg) {
    // Arithmetic first so the inputs it reads are recomputed as well.
    remat_pass(ir, |i| !matches!(i, Inst::LoadParam { .. }));
    remat_pass(ir, |i| matches!(i, Inst::LoadParam { .. }));
}

fn remat_pass(ir: &mut IrCfg, pick: impl Fn(&Inst) -> bool) {
    let defs = def_sites(ir);
    let uses = use_count(ir);
    let inputs: BTreeSet<Reg> = defs
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .filter(|(_, v)| matches!(ir.blocks[v[0].0].insts[v[0].1], Inst::LoadParam { .. }))
        .map(|(r, _)| *r)
        .collect();
    let mut victims: Vec<(Reg, Inst)> = Vec::new();
    for (r, sites) in &defs {
        let [(b, i)] = sites[..] else { continue };
        let inst = &ir.blocks[b].insts[i];
        if !pick(inst) || !rematerializable(inst, &inputs) {
            continue;
        }
        // A value with one use later in its own block is already as close
        // to its use as recomputation would put it.
        let n = uses.get(r).copied().unwrap_or(0);
        if n == 0 || (n == 1 && used_later_in_block(ir, b, i, *r)) {
            continue;
        }
        victims.push((*r, inst.clone()));
    }
    for (r, inst) in victims {
        remove_def(ir, r);
        for b in 0..ir.blocks.len() {
            let mut k = 0;
            while k < ir.blocks[b].insts.len() {
                if ir.blocks[b].insts[k].uses().contains(&r) {
                    let n = ir.fresh();
                    ir.blocks[b].insts[k].map_uses(&mut |u| Operand::Reg(if u == r { n } else { u }));
                    ir.blocks[b].insts.insert(k, with_def(&inst, n));
                    ir.blocks[b].origins.insert(k, None);
                    k += 1;
                }
                k += 1;
            }
            if ir.blocks[b].term.uses().contains(&r) {
                let n = ir.fresh();
                ir.blocks[b].insts.push(with_def(&inst, n));
                ir.blocks[b].origins.push(None);
                if let Term::Branch { cond, .. } = &mut ir.blocks[b].term {
                    *cond = Operand::Reg(n);
                }
            }
        }
    }
}

fn used_later_in_block(ir: &IrCfg, b: BlockId, i: usize, r: Reg) -> bool {
    let blk = &ir.blocks[b];
    blk.insts[i + 1..].iter().any(|x| x.uses().contains(&r)) || blk.term.uses().contains(&r)
}

fn remove_def(ir: &mut IrCfg, r: Reg) {
    for blk in &mut ir.blocks {
        if let Some(i) = blk.insts.iter().position(|x| x.def() == Some(r)) {
            blk.insts.remove(i);
            blk.origins.remove(i);
        }
    }
}

fn with_def(inst: &Inst, r: Reg) -> Inst {
    let mut i = inst.clone();
    crate::model::lower::set_def(&mut i, r);
    i
}

/// Natural loops as (header, body blocks), from back edges `latch -> header`
/// where the header dominates the latch.
#[allow(clippy::needless_range_loop)]
fn loops(ir: &IrCfg) -> Vec<(BlockId, BTreeSet<BlockId>)> {
    let n = ir.blocks.len();
    let preds = ir.preds();
    let all: BTreeSet<BlockId> = (0..n).collect();
    let mut dom: Vec<BTreeSet<BlockId>> = vec![all; n];
    dom[ir.entry] = BTreeSet::from([ir.entry]);
    let mut changed = true;
    while changed {
        changed = false;
        for b in 0..n {
            if b == ir.entry {
                continue;
            }
            let mut d: Option<BTreeSet<BlockId>> = None;
            for p in &preds[b] {
                d = Some(match d {
                    None => dom[*p].clone(),
                    Some(d) => d.intersection(&dom[*p]).copied().collect(),
                });
            }
            let mut d = d.unwrap_or_default();
            d.insert(b);
            if d != dom[b] {
                dom[b] = d;
                changed = true;
            }
        }
    }
    let mut out = Vec::new();
    for latch in 0..n {
        for h in ir.blocks[latch].term.successors() {
            if !dom[latch].contains(&h) {
                continue;
            }
            let mut body = BTreeSet::from([h]);
            let mut work = vec![latch];
            while let Some(x) = work.pop() {
                if body.insert(x) {
                    work.extend(preds[x].iter().copied());
                }
            }
            out.push((h, body));
        }
    }
    out
}

fn spill_across_loops(ir: &mut IrCfg) {
    let mut slot = ir
        .blocks
        .iter()
        .flat_map(|b| &b.insts)
        .filter_map(|i| match i {
            Inst::Spill { slot, .. } => Some(slot + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    for (h, body) in loops(ir) {
        let live = compute_liveness(ir);
        let preds = ir.preds();
        let outside: Vec<BlockId> = preds[h].iter().copied().filter(|p| !body.contains(p)).collect();
        let [pre] = outside[..] else { continue };
        let exits: BTreeSet<BlockId> = body
            .iter()
            .flat_map(|b| ir.blocks[*b].term.successors())
            .filter(|s| !body.contains(s))
            .collect();
        if exits.len() != 1 {
            continue;
        }
        let exit = *exits.iter().next().unwrap();
        if preds[exit].iter().any(|p| !body.contains(p)) {
            continue;
        }
        let mut touched: BTreeSet<Reg> = BTreeSet::new();
        for b in &body {
            let blk = &ir.blocks[*b];
            touched.extend(blk.insts.iter().flat_map(|i| i.uses().into_iter().chain(i.def())));
            touched.extend(blk.term.uses());
        }
        let across: Vec<Reg> = live.live_in[h]
            .intersection(&live.live_in[exit])
            .filter(|r| !touched.contains(r))
            .copied()
            .collect();
        for r in across {
            ir.blocks[pre].insts.push(Inst::Spill { slot, src: r });
            ir.blocks[pre].origins.push(None);
            ir.blocks[exit].insts.insert(0, Inst::Reload { dst: r, slot });
            ir.blocks[exit].origins.insert(0, None);
            slot += 1;
        }
    }
}
