//! Output artifacts of a run: kernels, the case report and the tree.

pub mod export;
pub mod kernel;
pub mod report;

use thiserror::Error;

use crate::counters::{CounterError, Measure};
use crate::engine::{Outcome, Setup};
use crate::machine::MachineSpec;

pub use export::{tree_dot, tree_json};
pub use kernel::{emit_kernel, KernelOptions, KernelText};
pub use report::{case_header, emit_report};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EmitError {
    #[error("nest has {grid} grid and {thread} thread loops; at most 2 of each can be mapped")]
    TooDeep { grid: usize, thread: usize },
    #[error("cached array `{0}` is accessed with more than two strided dimensions")]
    CacheShape(String),
    #[error(transparent)]
    Counter(#[from] CounterError),
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmitOptions {
    pub kernel: KernelOptions,
    /// Adds per-node counter values to the report.
    pub explain: bool,
}

impl EmitOptions {
    pub fn for_machine(spec: &MachineSpec) -> EmitOptions {
        EmitOptions {
            kernel: KernelOptions {
                grid_stride: spec.machine.grid_stride,
                shared_limit: spec.counters.iter().find(|c| c.measure == Measure::SharedWords).map(|c| c.bound.clone()),
            },
            explain: false,
        }
    }
}

/// Every artifact of a run as `(file name, contents)`, in a fixed order.
pub fn artifacts(name: &str, setup: &Setup, out: &Outcome, opts: &EmitOptions) -> Result<Vec<(String, String)>, EmitError> {
    let mut files = Vec::new();
    for c in &out.cases {
        let k = emit_kernel(&c.g, &format!("{name}_case{}", c.index), &opts.kernel)?;
        files.push((format!("{name}.case{}.cu", c.index), k.to_source()));
    }
    files.push((format!("{name}.report.txt"), emit_report(name, setup, out, opts.explain)?));
    files.push((format!("{name}.tree.json"), tree_json(setup, out)));
    files.push((format!("{name}.tree.dot"), tree_dot(setup, out)));
    Ok(files)
}
