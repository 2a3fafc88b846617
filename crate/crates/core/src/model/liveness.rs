//! Backward liveness over the IR and the resulting register estimate.

use std::collections::BTreeSet;

use super::ir::{BlockId, IrCfg, Reg};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Liveness {
    pub live_in: Vec<BTreeSet<Reg>>,
    pub live_out: Vec<BTreeSet<Reg>>,
    /// Per block, the live set before each instruction, then the set before
    /// the terminator.
    pub points: Vec<Vec<BTreeSet<Reg>>>,
    pub maxlive: usize,
}

impl Liveness {
    /// Live set right after each instruction of block `b`.
    pub fn live_after(&self, b: BlockId) -> Vec<BTreeSet<Reg>> {
        self.points[b][1..].to_vec()
    }
}

pub fn compute_liveness(ir: &IrCfg) -> Liveness {
    let order: Vec<BlockId> = (0..ir.blocks.len()).rev().collect();
    compute_liveness_in_order(ir, &order)
}

/// Same fixpoint, visiting blocks in the given order on every sweep.
pub fn compute_liveness_in_order(ir: &IrCfg, order: &[BlockId]) -> Liveness {
    let n = ir.blocks.len();
    let mut live_in = vec![BTreeSet::new(); n];
    let mut live_out: Vec<BTreeSet<Reg>> = vec![BTreeSet::new(); n];
    let mut changed = true;
    while changed {
        changed = false;
        for &b in order {
            let blk = &ir.blocks[b];
            let out: BTreeSet<Reg> = blk
                .term
                .successors()
                .iter()
                .flat_map(|s| live_in[*s].iter().copied())
                .collect();
            let mut live = out.clone();
            live.extend(blk.term.uses());
            for inst in blk.insts.iter().rev() {
                if let Some(d) = inst.def() {
                    live.remove(&d);
                }
                live.extend(inst.uses());
            }
            if live != live_in[b] || out != live_out[b] {
                live_in[b] = live;
                live_out[b] = out;
                changed = true;
            }
        }
    }

    let mut points = Vec::with_capacity(n);
    let mut maxlive = 0;
    for (b, blk) in ir.blocks.iter().enumerate() {
        let mut live = live_out[b].clone();
        maxlive = maxlive.max(live.len());
        live.extend(blk.term.uses());
        let mut pts = vec![live.clone()];
        maxlive = maxlive.max(live.len());
        for inst in blk.insts.iter().rev() {
            let mut after = live.clone();
            if let Some(d) = inst.def() {
                after.insert(d);
                maxlive = maxlive.max(after.len());
                live.remove(&d);
            }
            live.extend(inst.uses());
            maxlive = maxlive.max(live.len());
            pts.push(live.clone());
        }
        pts.reverse();
        points.push(pts);
    }
    Liveness {
        live_in,
        live_out,
        points,
        maxlive,
    }
}
