//! Executes the IR of one thread against concrete inputs.

use std::collections::BTreeMap;

use crate::dsl::fold_binop;
use crate::interp::{Arrays, InterpError, Scalars};

use super::ir::*;
use super::lower::bin_op;

const STEP_LIMIT: u64 = 10_000_000;

pub fn run_ir(ir: &IrCfg, inputs: &Scalars, arrays: &mut Arrays) -> Result<(), InterpError> {
    let mut regs: BTreeMap<Reg, i64> = BTreeMap::new();
    let mut slots: BTreeMap<u32, i64> = BTreeMap::new();
    let mut b = ir.entry;
    let mut steps = 0u64;
    let read = |regs: &BTreeMap<Reg, i64>, o: &Operand| -> Result<i64, InterpError> {
        match o {
            Operand::Imm(n) => Ok(*n),
            Operand::Reg(r) => regs
                .get(r)
                .copied()
                .ok_or_else(|| InterpError::Unbound(r.to_string())),
        }
    };
    loop {
        let blk = &ir.blocks[b];
        for inst in &blk.insts {
            steps += 1;
            if steps > STEP_LIMIT {
                return Err(InterpError::StepLimit);
            }
            match inst {
                Inst::LoadParam { dst, name } => {
                    let v = *inputs.get(name).ok_or_else(|| InterpError::Unbound(name.clone()))?;
                    regs.insert(*dst, v);
                }
                Inst::Copy { dst, src } => {
                    let v = read(&regs, src)?;
                    regs.insert(*dst, v);
                }
                Inst::Bin { dst, op, a, b } => {
                    let x = read(&regs, a)?;
                    let y = read(&regs, b)?;
                    let v = fold_binop(bin_op(*op), x, y)
                        .ok_or_else(|| InterpError::Arithmetic(inst.to_string()))?;
                    regs.insert(*dst, v);
                }
                Inst::Load { dst, array, index } => {
                    let i = read(&regs, index)?;
                    let a = arrays.get(array).ok_or_else(|| InterpError::Unbound(array.clone()))?;
                    if i < 0 || i as usize >= a.len() {
                        return Err(InterpError::OutOfBounds { array: array.clone(), index: i, len: a.len() });
                    }
                    regs.insert(*dst, a[i as usize]);
                }
                Inst::Store { array, index, value } => {
                    let i = read(&regs, index)?;
                    let v = read(&regs, value)?;
                    let a = arrays.get_mut(array).ok_or_else(|| InterpError::Unbound(array.clone()))?;
                    if i < 0 || i as usize >= a.len() {
                        return Err(InterpError::OutOfBounds { array: array.clone(), index: i, len: a.len() });
                    }
                    a[i as usize] = v;
                }
                Inst::Spill { slot, src } => {
                    let v = read(&regs, &Operand::Reg(*src))?;
                    slots.insert(*slot, v);
                }
                Inst::Reload { dst, slot } => {
                    let v = *slots
                        .get(slot)
                        .ok_or_else(|| InterpError::Unbound(format!("#{slot}")))?;
                    regs.insert(*dst, v);
                }
                Inst::Sync(_) => {}
            }
        }
        match &blk.term {
            Term::Jump(n) => b = *n,
            Term::Branch { cond, then, els } => {
                b = if read(&regs, cond)? != 0 { *then } else { *els };
            }
            Term::Return => return Ok(()),
        }
        steps += 1;
        if steps > STEP_LIMIT {
            return Err(InterpError::StepLimit);
        }
    }
}
