//! Batch driver: source and machine files in, artifacts out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dsl::{parse, DslError};
use crate::emit::{artifacts, EmitError, EmitOptions};
use crate::engine::{self, verify_coverage, verify_optimality, verify_witnesses, EngineError};
use crate::machine::{MachineError, MachineSpec};
use crate::model::{build_source_cfg, ModelError};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Dsl {
        path: PathBuf,
        #[source]
        source: DslError,
    },
    #[error("{path}: {source}")]
    Model {
        path: PathBuf,
        #[source]
        source: ModelError,
    },
    #[error("{path}: {source}")]
    Machine {
        path: PathBuf,
        #[source]
        source: MachineError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Emit(#[from] EmitError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub grid_stride: Option<i64>,
    pub budget: Option<u64>,
    pub samples: usize,
    pub seed: u64,
    pub verify: bool,
    pub explain: bool,
    pub out: PathBuf,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            grid_stride: None,
            budget: None,
            samples: 1000,
            seed: 0,
            verify: true,
            explain: false,
            out: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub cases: usize,
    pub height: usize,
    pub written: Vec<PathBuf>,
    /// Verification findings; empty when everything held or was skipped.
    pub violations: Vec<String>,
}

fn read(path: &Path) -> Result<String, DriverError> {
    fs::read_to_string(path).map_err(|source| DriverError::Io { path: path.to_path_buf(), source })
}

pub fn load_machine(path: Option<&Path>) -> Result<MachineSpec, DriverError> {
    match path {
        None => Ok(MachineSpec::fermi()),
        Some(p) => MachineSpec::parse(&read(p)?).map_err(|source| DriverError::Machine { path: p.to_path_buf(), source }),
    }
}

pub fn run_files(input: &Path, machine: Option<&Path>, opts: &RunOptions) -> Result<RunSummary, DriverError> {
    let text = read(input)?;
    let program = parse(&text).map_err(|source| DriverError::Dsl { path: input.to_path_buf(), source })?;
    let g = build_source_cfg(&program).map_err(|source| DriverError::Model { path: input.to_path_buf(), source })?;
    let mut spec = load_machine(machine)?;
    if let Some(s) = opts.grid_stride {
        spec.machine.grid_stride = s;
    }
    if let Some(b) = opts.budget {
        spec.machine.budget = b;
    }
    let (setup, out) = engine::run(&g, &spec)?;

    let mut violations = Vec::new();
    if opts.verify {
        let cov = verify_coverage(&out.cases, &setup, opts.samples, opts.seed, &BTreeMap::new())?;
        for p in &cov.uncovered {
            violations.push(format!("no case covers {p:?}"));
        }
        for p in &cov.undecided {
            violations.push(format!("coverage undecided at {p:?}"));
        }
        for id in verify_optimality(&out.cases, &setup)?.failures() {
            violations.push(format!("counter `{id}` is not optimal at any case"));
        }
        let w = verify_witnesses(&out.cases);
        for c in w.missing {
            violations.push(format!("case {c} has no witness"));
        }
        for c in w.violated {
            violations.push(format!("case {c} has a witness violating its constraints"));
        }
    }

    let name = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "kernel".into());
    let mut emit = EmitOptions::for_machine(&spec);
    emit.explain = opts.explain;
    let files = artifacts(&name, &setup, &out, &emit)?;
    fs::create_dir_all(&opts.out).map_err(|source| DriverError::Io { path: opts.out.clone(), source })?;
    let mut written = Vec::new();
    for (f, body) in files {
        let path = opts.out.join(f);
        fs::write(&path, body).map_err(|source| DriverError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(RunSummary {
        cases: out.cases.len(),
        height: out.tree.height(),
        written,
        violations,
    })
}
