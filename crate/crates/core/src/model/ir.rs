//! Three-address IR over unlimited virtual registers.

use std::fmt;

pub type BlockId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reg(pub u32);

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Reg),
    Imm(i64),
}

impl Operand {
    pub fn reg(&self) -> Option<Reg> {
        match self {
            Operand::Reg(r) => Some(*r),
            Operand::Imm(_) => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "{r}"),
            Operand::Imm(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IrOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl IrOp {
    pub fn name(self) -> &'static str {
        match self {
            IrOp::Add => "add",
            IrOp::Sub => "sub",
            IrOp::Mul => "mul",
            IrOp::Div => "div",
            IrOp::Mod => "mod",
            IrOp::Lt => "lt",
            IrOp::Le => "le",
            IrOp::Gt => "gt",
            IrOp::Ge => "ge",
            IrOp::Eq => "eq",
            IrOp::Ne => "ne",
            IrOp::And => "and",
            IrOp::Or => "or",
        }
    }

    pub fn is_compare(self) -> bool {
        matches!(
            self,
            IrOp::Lt | IrOp::Le | IrOp::Gt | IrOp::Ge | IrOp::Eq | IrOp::Ne
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncKind {
    /// After cached arrays were copied in.
    CacheIn,
    /// Before cached arrays are written back.
    CacheOut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inst {
    /// Reads a kernel input: a parameter, a context variable or a
    /// `meta_for` index.
    LoadParam { dst: Reg, name: String },
    Copy { dst: Reg, src: Operand },
    /// Arithmetic, comparisons (0/1 result) and logical and/or.
    Bin { dst: Reg, op: IrOp, a: Operand, b: Operand },
    Load { dst: Reg, array: String, index: Operand },
    Store { array: String, index: Operand, value: Operand },
    Spill { slot: u32, src: Reg },
    Reload { dst: Reg, slot: u32 },
    Sync(SyncKind),
}

impl Inst {
    pub fn def(&self) -> Option<Reg> {
        match self {
            Inst::LoadParam { dst, .. }
            | Inst::Copy { dst, .. }
            | Inst::Bin { dst, .. }
            | Inst::Load { dst, .. }
            | Inst::Reload { dst, .. } => Some(*dst),
            Inst::Store { .. } | Inst::Spill { .. } | Inst::Sync(_) => None,
        }
    }

    pub fn uses(&self) -> Vec<Reg> {
        let ops: Vec<Operand> = match self {
            Inst::LoadParam { .. } | Inst::Reload { .. } | Inst::Sync(_) => vec![],
            Inst::Copy { src, .. } => vec![*src],
            Inst::Bin { a, b, .. } => vec![*a, *b],
            Inst::Load { index, .. } => vec![*index],
            Inst::Store { index, value, .. } => vec![*index, *value],
            Inst::Spill { src, .. } => vec![Operand::Reg(*src)],
        };
        ops.iter().filter_map(Operand::reg).collect()
    }

    pub fn map_uses(&mut self, f: &mut impl FnMut(Reg) -> Operand) {
        let mut m = |o: &mut Operand| {
            if let Operand::Reg(r) = *o {
                *o = f(r);
            }
        };
        match self {
            Inst::Copy { src, .. } => m(src),
            Inst::Bin { a, b, .. } => {
                m(a);
                m(b);
            }
            Inst::Load { index, .. } => m(index),
            Inst::Store { index, value, .. } => {
                m(index);
                m(value);
            }
            Inst::Spill { src, .. } => {
                if let Operand::Reg(r) = f(*src) {
                    *src = r;
                }
            }
            Inst::LoadParam { .. } | Inst::Reload { .. } | Inst::Sync(_) => {}
        }
    }

    /// No side effects and no dependence on memory.
    pub fn is_pure(&self) -> bool {
        matches!(
            self,
            Inst::LoadParam { .. } | Inst::Copy { .. } | Inst::Bin { .. }
        )
    }
}

impl fmt::Display for Inst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inst::LoadParam { dst, name } => write!(f, "{dst} = param {name}"),
            Inst::Copy { dst, src } => write!(f, "{dst} = {src}"),
            Inst::Bin { dst, op, a, b } => write!(f, "{dst} = {} {a}, {b}", op.name()),
            Inst::Load { dst, array, index } => write!(f, "{dst} = load {array}[{index}]"),
            Inst::Store { array, index, value } => write!(f, "store {array}[{index}], {value}"),
            Inst::Spill { slot, src } => write!(f, "spill #{slot}, {src}"),
            Inst::Reload { dst, slot } => write!(f, "{dst} = reload #{slot}"),
            Inst::Sync(SyncKind::CacheIn) => write!(f, "sync cache-in"),
            Inst::Sync(SyncKind::CacheOut) => write!(f, "sync cache-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Jump(BlockId),
    Branch { cond: Operand, then: BlockId, els: BlockId },
    Return,
}

impl Term {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Term::Jump(b) => vec![*b],
            Term::Branch { then, els, .. } => vec![*then, *els],
            Term::Return => vec![],
        }
    }

    pub fn uses(&self) -> Vec<Reg> {
        match self {
            Term::Branch { cond, .. } => cond.reg().into_iter().collect(),
            _ => vec![],
        }
    }
}

/// Which source block and statement an instruction came from; `None` for
/// instructions with no single source statement (inputs, loop control).
pub type Origin = Option<(usize, usize)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrBlock {
    pub insts: Vec<Inst>,
    pub origins: Vec<Origin>,
    pub term: Term,
}

impl IrBlock {
    pub fn new() -> IrBlock {
        IrBlock {
            insts: Vec::new(),
            origins: Vec::new(),
            term: Term::Return,
        }
    }

    pub fn push(&mut self, i: Inst, o: Origin) {
        self.insts.push(i);
        self.origins.push(o);
    }
}

impl Default for IrBlock {
    fn default() -> Self {
        IrBlock::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrCfg {
    pub blocks: Vec<IrBlock>,
    pub entry: BlockId,
    pub next_reg: u32,
}

impl IrCfg {
    pub fn fresh(&mut self) -> Reg {
        let r = Reg(self.next_reg);
        self.next_reg += 1;
        r
    }

    pub fn preds(&self) -> Vec<Vec<BlockId>> {
        let mut p = vec![Vec::new(); self.blocks.len()];
        for (i, b) in self.blocks.iter().enumerate() {
            for s in b.term.successors() {
                p[s].push(i);
            }
        }
        p
    }

    pub fn inst_count(&self) -> usize {
        self.blocks.iter().map(|b| b.insts.len()).sum()
    }

    pub fn count(&self, pred: impl Fn(&Inst) -> bool) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| &b.insts)
            .filter(|i| pred(i))
            .count()
    }
}

impl fmt::Display for IrCfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            writeln!(f, "bb{i}:")?;
            for inst in &b.insts {
                writeln!(f, "  {inst}")?;
            }
            match &b.term {
                Term::Jump(n) => writeln!(f, "  jump bb{n}")?,
                Term::Branch { cond, then, els } => writeln!(f, "  branch {cond}, bb{then}, bb{els}")?,
                Term::Return => writeln!(f, "  return")?,
            }
        }
        Ok(())
    }
}
