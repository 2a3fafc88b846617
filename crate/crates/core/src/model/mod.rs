//! Source and IR control-flow graphs of a nest body, and liveness.

pub mod ir;
pub mod ir_interp;
pub mod liveness;
pub mod lower;
pub mod source_cfg;

use thiserror::Error;

use crate::dsl::DslError;

pub use ir::{Inst, IrCfg, IrOp, Operand, Reg, Term};
pub use ir_interp::run_ir;
pub use liveness::{compute_liveness, compute_liveness_in_order, Liveness};
pub use source_cfg::{build_source_cfg, LoopKind, SourceCfg, SrcBlock, SrcTerm};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("unknown strategy `{0}` in the applied-strategy list")]
    UnknownStrategy(String),
    #[error("strategy `{0}` does not act on the IR")]
    NotIrStrategy(String),
}

/// The IR of `g` after replaying the IR-level strategies of `applied` in
/// order.
pub fn lower_to_ir(g: &SourceCfg, applied: &[String]) -> Result<IrCfg, ModelError> {
    let mut ir = lower::lower_base(g);
    for id in applied {
        match crate::strategies::info(id) {
            None => return Err(ModelError::UnknownStrategy(id.clone())),
            Some(s) if s.target != crate::strategies::Target::Ir => continue,
            Some(_) => {}
        }
        ir = crate::strategies::apply_ir(id, &ir)?;
    }
    Ok(ir)
}
