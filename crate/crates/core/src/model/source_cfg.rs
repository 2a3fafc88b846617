//! Control-flow graph of the per-thread body of a `meta_schedule` nest.
//!
//! Serial loops keep their header as a block whose terminator carries the
//! induction variable, its start value and bound; entering from outside
//! initializes the variable and every back edge increments it.

use std::fmt;

use crate::dsl::{
    classify_parameters, expr_to_string, program_to_string, stmt_to_string, Expr, LoopRole,
    MetaLoop, Nest, ParamTable, Program, Stmt, StmtKind,
};

use super::ModelError;

pub type BlockId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    Grid,
    Thread,
    Serial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SrcTerm {
    Jump(BlockId),
    Branch {
        cond: Expr,
        then: BlockId,
        els: BlockId,
        join: BlockId,
    },
    Loop {
        var: String,
        init: Expr,
        bound: Expr,
        body: BlockId,
        exit: BlockId,
    },
    While {
        cond: Expr,
        body: BlockId,
        exit: BlockId,
    },
    Exit,
}

impl SrcTerm {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            SrcTerm::Jump(b) => vec![*b],
            SrcTerm::Branch { then, els, .. } => vec![*then, *els],
            SrcTerm::Loop { body, exit, .. } | SrcTerm::While { body, exit, .. } => {
                vec![*body, *exit]
            }
            SrcTerm::Exit => vec![],
        }
    }
}

/// Straight-line statements (declarations, assignments, asserts) followed
/// by a terminator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrcBlock {
    pub stmts: Vec<Stmt>,
    pub term: SrcTerm,
}

#[derive(Debug, Clone)]
pub struct SourceCfg {
    program: Program,
    params: ParamTable,
    nest: Nest,
    pub blocks: Vec<SrcBlock>,
    pub entry: BlockId,
}

impl PartialEq for SourceCfg {
    fn eq(&self, other: &Self) -> bool {
        self.program == other.program
    }
}

impl Eq for SourceCfg {}

pub fn build_source_cfg(p: &Program) -> Result<SourceCfg, ModelError> {
    let params = classify_parameters(p)?;
    let nest = p.nest()?;
    let mut b = Builder { blocks: Vec::new() };
    let entry = b.new_block();
    let last = b.region(std::slice::from_ref(&nest.body), entry);
    b.blocks[last].term = SrcTerm::Exit;
    Ok(SourceCfg {
        program: p.clone(),
        params,
        nest,
        blocks: b.blocks,
        entry,
    })
}

struct Builder {
    blocks: Vec<SrcBlock>,
}

impl Builder {
    fn new_block(&mut self) -> BlockId {
        self.blocks.push(SrcBlock {
            stmts: Vec::new(),
            term: SrcTerm::Exit,
        });
        self.blocks.len() - 1
    }

    /// Appends `stmts` starting in block `cur`; returns the block where
    /// control continues afterwards (its terminator still unset).
    fn region(&mut self, stmts: &[Stmt], mut cur: BlockId) -> BlockId {
        for s in stmts {
            match &s.kind {
                StmtKind::Block(inner) => cur = self.region(inner, cur),
                StmtKind::If { cond, then, els } => {
                    let t = self.new_block();
                    let t_end = self.region(std::slice::from_ref(then), t);
                    let (e, e_end) = match els {
                        Some(e) => {
                            let eb = self.new_block();
                            (Some(eb), self.region(std::slice::from_ref(e), eb))
                        }
                        None => (None, 0),
                    };
                    let join = self.new_block();
                    self.blocks[t_end].term = SrcTerm::Jump(join);
                    if e.is_some() {
                        self.blocks[e_end].term = SrcTerm::Jump(join);
                    }
                    self.blocks[cur].term = SrcTerm::Branch {
                        cond: cond.clone(),
                        then: t,
                        els: e.unwrap_or(join),
                        join,
                    };
                    cur = join;
                }
                StmtKind::For {
                    var,
                    init,
                    bound,
                    body,
                } => {
                    let header = self.new_block();
                    self.blocks[cur].term = SrcTerm::Jump(header);
                    let b = self.new_block();
                    let b_end = self.region(std::slice::from_ref(body), b);
                    self.blocks[b_end].term = SrcTerm::Jump(header);
                    let exit = self.new_block();
                    self.blocks[header].term = SrcTerm::Loop {
                        var: var.clone(),
                        init: init.clone(),
                        bound: bound.clone(),
                        body: b,
                        exit,
                    };
                    cur = exit;
                }
                StmtKind::While { cond, body } => {
                    let header = self.new_block();
                    self.blocks[cur].term = SrcTerm::Jump(header);
                    let b = self.new_block();
                    let b_end = self.region(std::slice::from_ref(body), b);
                    self.blocks[b_end].term = SrcTerm::Jump(header);
                    let exit = self.new_block();
                    self.blocks[header].term = SrcTerm::While {
                        cond: cond.clone(),
                        body: b,
                        exit,
                    };
                    cur = exit;
                }
                _ => self.blocks[cur].stmts.push(s.clone()),
            }
        }
        cur
    }
}

impl SourceCfg {
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn params(&self) -> &ParamTable {
        &self.params
    }

    pub fn nest(&self) -> &Nest {
        &self.nest
    }

    pub fn cache(&self) -> &[String] {
        &self.nest.cache
    }

    pub fn meta_loops(&self) -> &[MetaLoop] {
        &self.nest.loops
    }

    pub fn loop_kind(role: LoopRole) -> LoopKind {
        match role {
            LoopRole::Grid => LoopKind::Grid,
            LoopRole::Thread => LoopKind::Thread,
        }
    }

    /// The thread body as a statement list recovered from the blocks.
    pub fn body_stmts(&self) -> Vec<Stmt> {
        self.region(self.entry, None)
    }

    fn region(&self, mut b: BlockId, stop: Option<BlockId>) -> Vec<Stmt> {
        let mut out = Vec::new();
        loop {
            if Some(b) == stop {
                return out;
            }
            let blk = &self.blocks[b];
            out.extend(blk.stmts.iter().cloned());
            match &blk.term {
                SrcTerm::Jump(n) => b = *n,
                SrcTerm::Branch {
                    cond,
                    then,
                    els,
                    join,
                } => {
                    let t = Stmt::block(self.region(*then, Some(*join)));
                    let e = (els != join).then(|| Box::new(Stmt::block(self.region(*els, Some(*join)))));
                    out.push(Stmt::new(StmtKind::If {
                        cond: cond.clone(),
                        then: Box::new(t),
                        els: e,
                    }));
                    b = *join;
                }
                SrcTerm::Loop {
                    var,
                    init,
                    bound,
                    body,
                    exit,
                } => {
                    out.push(Stmt::new(StmtKind::For {
                        var: var.clone(),
                        init: init.clone(),
                        bound: bound.clone(),
                        body: Box::new(Stmt::block(self.region(*body, Some(b)))),
                    }));
                    b = *exit;
                }
                SrcTerm::While { cond, body, exit } => {
                    out.push(Stmt::new(StmtKind::While {
                        cond: cond.clone(),
                        body: Box::new(Stmt::block(self.region(*body, Some(b)))),
                    }));
                    b = *exit;
                }
                SrcTerm::Exit => return out,
            }
        }
    }

    /// Rebuilds the whole compile unit from the graph.
    pub fn reconstruct(&self) -> Program {
        let body = Stmt::block(self.body_stmts());
        let loops = self.nest.loops.clone();
        self.program.map_schedule(|cache, _| {
            let inner = loops.iter().rev().fold(body.clone(), |acc, l| {
                Stmt::new(StmtKind::MetaFor {
                    var: l.var.clone(),
                    bound: l.bound.clone(),
                    role: Some(l.role),
                    body: Box::new(acc),
                })
            });
            (cache.to_vec(), inner)
        })
    }

    /// A new graph for `p`, classified from scratch.
    pub fn with_program(&self, p: Program) -> Result<SourceCfg, ModelError> {
        build_source_cfg(&p)
    }

    pub fn to_source(&self) -> String {
        program_to_string(&self.program)
    }

    /// Successor lists, used to compare graph shapes.
    pub fn shape(&self) -> Vec<Vec<BlockId>> {
        self.blocks.iter().map(|b| b.term.successors()).collect()
    }

    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.blocks.len()];
        let mut stack = vec![self.entry];
        while let Some(b) = stack.pop() {
            if std::mem::replace(&mut seen[b], true) {
                continue;
            }
            stack.extend(self.blocks[b].term.successors());
        }
        seen
    }
}

impl fmt::Display for SourceCfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.nest.loops {
            writeln!(f, "{:?} loop {} < {}", Self::loop_kind(l.role), l.var, expr_to_string(&l.bound))?;
        }
        for (i, b) in self.blocks.iter().enumerate() {
            writeln!(f, "b{i}:")?;
            for s in &b.stmts {
                write!(f, "{}", stmt_to_string(s, 1))?;
            }
            match &b.term {
                SrcTerm::Jump(n) => writeln!(f, "  goto b{n}")?,
                SrcTerm::Branch { cond, then, els, join } => writeln!(
                    f,
                    "  if {} then b{then} else b{els} join b{join}",
                    expr_to_string(cond)
                )?,
                SrcTerm::Loop { var, init, bound, body, exit } => writeln!(
                    f,
                    "  serial {var} from {} while < {} body b{body} exit b{exit}",
                    expr_to_string(init),
                    expr_to_string(bound)
                )?,
                SrcTerm::While { cond, body, exit } => {
                    writeln!(f, "  while {} body b{body} exit b{exit}", expr_to_string(cond))?
                }
                SrcTerm::Exit => writeln!(f, "  exit")?,
            }
        }
        Ok(())
    }
}
