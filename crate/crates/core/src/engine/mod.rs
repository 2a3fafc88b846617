//! The case-discussion search: quintuples, the optimize step, the decision
//! tree and the checks run on its leaves.

pub mod tree;
pub mod verify;

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::algebra::{AlgebraError, Constraint, ConstraintSystem, ParamBox, Poly, Rat, SearchConfig, Verdict};
use crate::counters::{self, CounterConfig, CounterDef, CounterError, CounterKind, Value};
use crate::machine::{MachineSpec, ParamKind};
use crate::model::SourceCfg;
use crate::strategies::{self, StrategyError, Target};

pub use tree::{DecisionTree, Edge, EdgeKind, Node};
pub use verify::{
    verify_coverage, verify_optimality, verify_witnesses, walk_subset, CoverageReport, OptimalityReport, SoundnessReport,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error("evaluating `{counter}` after [{path}]: {source}")]
    Counter {
        counter: String,
        path: String,
        #[source]
        source: CounterError,
    },
    #[error("applying `{strategy}` after [{path}]: {source}")]
    Strategy {
        strategy: String,
        path: String,
        #[source]
        source: StrategyError,
    },
    #[error("unknown counter `{0}` on the pending stack")]
    UnknownCounter(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Everything the search needs besides the quintuple itself.
#[derive(Debug, Clone)]
pub struct Setup {
    pub counters: Vec<CounterDef>,
    pub config: CounterConfig,
    /// Strategy roster in search order.
    pub roster: Vec<String>,
    pub bx: ParamBox,
    pub search: SearchConfig,
    pub resource_params: Vec<String>,
    pub perf_params: Vec<String>,
    pub data_params: Vec<String>,
    pub program_params: Vec<String>,
}

impl Setup {
    pub fn new(g: &SourceCfg, spec: &MachineSpec) -> Setup {
        let mut bx = ParamBox::new();
        let mut resource_params = Vec::new();
        let mut perf_params = Vec::new();
        for p in &spec.params {
            match p.kind {
                ParamKind::ResourceLimit => {
                    bx = bx.with(&p.name, p.min as i64, p.max as i64);
                    resource_params.push(p.name.clone());
                }
                ParamKind::PerformanceRatio => {
                    bx = bx.with_real(&p.name);
                    perf_params.push(p.name.clone());
                }
            }
        }
        let t = g.params();
        for d in &t.data_params {
            bx = bx.with(d, spec.ranges.data.0, spec.ranges.data.1);
        }
        for d in &t.program_params {
            bx = bx.with(d, spec.ranges.program.0, spec.ranges.program.1);
        }
        Setup {
            counters: spec.counter_defs(),
            config: spec.counter_config(),
            roster: spec.strategies.order.clone(),
            bx,
            search: SearchConfig {
                budget: spec.machine.budget,
                ..SearchConfig::default()
            },
            resource_params,
            perf_params,
            data_params: t.data_params.clone(),
            program_params: t.program_params.clone(),
        }
    }

    pub fn counter(&self, id: &str) -> Option<&CounterDef> {
        self.counters.iter().find(|c| c.id == id)
    }

    /// Print order for variables: machine, program, then data parameters.
    pub fn var_order(&self) -> Vec<String> {
        let mut v = self.resource_params.clone();
        v.extend(self.perf_params.iter().cloned());
        v.extend(self.program_params.iter().cloned());
        v.extend(self.data_params.iter().cloned());
        v
    }

    fn resource_ids(&self) -> Vec<String> {
        self.counters.iter().filter(|c| c.kind() == CounterKind::Resource).map(|c| c.id.clone()).collect()
    }

    fn perf_ids(&self) -> Vec<String> {
        self.counters.iter().filter(|c| c.kind() == CounterKind::Performance).map(|c| c.id.clone()).collect()
    }

    fn check(&self, c: &ConstraintSystem) -> Result<Verdict, EngineError> {
        Ok(c.check(&self.bx, &self.search)?)
    }
}

/// Search state of one program variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Quintuple {
    pub g: SourceCfg,
    /// IR-level strategies applied so far, in order.
    pub lambda: Vec<String>,
    /// Strategies not applied yet, in roster order.
    pub omega: Vec<String>,
    /// Counters still to evaluate; the front is the top of the stack.
    pub gamma: VecDeque<String>,
    pub c: ConstraintSystem,
    /// Every strategy applied so far, source and IR level, in order.
    pub applied: Vec<String>,
}

impl Quintuple {
    pub fn initial(g: SourceCfg, setup: &Setup) -> Quintuple {
        let mut gamma: VecDeque<String> = setup.resource_ids().into();
        gamma.extend(setup.perf_ids());
        let nonneg: Vec<String> = setup
            .resource_params
            .iter()
            .chain(&setup.data_params)
            .chain(&setup.program_params)
            .cloned()
            .collect();
        Quintuple {
            g,
            lambda: Vec::new(),
            omega: setup.roster.clone(),
            gamma,
            c: ConstraintSystem::init(&setup.perf_params, &nonneg),
            applied: Vec::new(),
        }
    }

    pub fn is_processed(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Pushes `ids` in order, so the last one ends on top.
    fn push_counters(&mut self, ids: &[String]) {
        for id in ids {
            self.gamma.push_front(id.clone());
        }
    }
}

/// The two ways a quintuple can continue after one counter evaluation.
#[derive(Debug, Clone)]
pub struct Split {
    pub counter: String,
    pub value: Value,
    pub accept: Option<(Vec<Constraint>, Quintuple, Verdict)>,
    /// Refuse constraints, the strategy applied and the resulting quintuple.
    pub refuse: Option<(Vec<Constraint>, String, Quintuple, Verdict)>,
}

/// `(accept, refuse)` constraints for value `v` of a counter bounded by `bound`.
pub fn edge_constraints(kind: CounterKind, v: &Value, bound: &str) -> (Vec<Constraint>, Vec<Constraint>) {
    let (n, d) = v.parts();
    let limit = Poly::var(bound);
    let mut accept = Vec::new();
    let nonneg = n.terms().all(|(_, c)| *c >= Rat::from_integer(0.into()));
    if !nonneg {
        accept.push(Constraint::le(Poly::zero(), n.clone()));
    }
    match kind {
        CounterKind::Resource => {
            accept.push(Constraint::le(n.clone(), limit.clone()));
            (accept, vec![Constraint::lt(limit, n)])
        }
        CounterKind::Performance => {
            let scaled = &limit * &d;
            accept.push(Constraint::le(n.clone(), scaled.clone()));
            (accept, vec![Constraint::lt(scaled, n.clone()), Constraint::le(n, d)])
        }
    }
}

fn with_all(c: &ConstraintSystem, cs: &[Constraint]) -> ConstraintSystem {
    cs.iter().fold(c.clone(), |acc, k| acc.push(k.clone()))
}

/// Pops the top counter of `q` and builds its accept and refuse branches.
/// Branches whose system is inconsistent over the box are dropped.
pub fn split(q: &Quintuple, setup: &Setup) -> Result<Split, EngineError> {
    let mut rest = q.clone();
    let id = rest.gamma.pop_front().expect("split needs a pending counter");
    let def = setup.counter(&id).ok_or_else(|| EngineError::UnknownCounter(id.clone()))?;
    let path = || q.applied.join(", ");
    let v = counters::evaluate(def, &q.g, &q.lambda, &setup.config)
        .map_err(|source| EngineError::Counter { counter: id.clone(), path: path(), source })?
        .value;
    let (acc, rej) = edge_constraints(def.kind(), &v, &def.bound);

    let mut a = rest.clone();
    a.c = with_all(&rest.c, &acc);
    let verdict = setup.check(&a.c)?;
    let accept = (!verdict.is_inconsistent()).then_some((acc, a, verdict));

    let mut r = rest;
    r.c = with_all(&r.c, &rej);
    let mut refuse = None;
    if !setup.check(&r.c)?.is_inconsistent() {
        if let Some((sid, next)) = apply_first(&r, def)? {
            let mut next = next;
            let replay = match def.kind() {
                CounterKind::Resource => {
                    let ids = setup.resource_ids();
                    let i = ids.iter().position(|x| *x == id).expect("resource counter");
                    ids[..=i].to_vec()
                }
                CounterKind::Performance => {
                    let mut ids = setup.resource_ids();
                    ids.push(id.clone());
                    ids
                }
            };
            next.push_counters(&replay);
            let verdict = setup.check(&next.c)?;
            if !verdict.is_inconsistent() {
                refuse = Some((rej, sid, next, verdict));
            }
        }
    }
    Ok(Split { counter: id, value: v, accept, refuse })
}

/// The first strategy of the roster that is still unapplied, belongs to
/// the counter's set and applies to the program.
fn apply_first(q: &Quintuple, def: &CounterDef) -> Result<Option<(String, Quintuple)>, EngineError> {
    for sid in q.omega.iter().filter(|s| def.sigma.contains(s)) {
        let info = strategies::info(sid).ok_or_else(|| EngineError::Strategy {
            strategy: sid.clone(),
            path: q.applied.join(", "),
            source: StrategyError::Unknown(sid.clone()),
        })?;
        let g = match strategies::apply_source(sid, &q.g) {
            Ok(g) => g,
            Err(StrategyError::Inapplicable { .. }) => continue,
            Err(source) => {
                return Err(EngineError::Strategy {
                    strategy: sid.clone(),
                    path: q.applied.join(", "),
                    source,
                })
            }
        };
        let mut next = q.clone();
        next.g = g;
        next.omega.retain(|s| s != sid);
        if info.target == Target::Ir {
            next.lambda.push(sid.clone());
        }
        next.applied.push(sid.clone());
        return Ok(Some((sid.clone(), next)));
    }
    Ok(None)
}

/// One optimize step: the accept quintuple of the top counter followed by
/// the results of optimizing its refuse quintuple, inconsistent systems
/// removed. Processed and unprocessed quintuples may both appear.
pub fn optimize_step(q: &Quintuple, setup: &Setup) -> Result<Vec<Quintuple>, EngineError> {
    let s = split(q, setup)?;
    let mut out = Vec::new();
    if let Some((_, a, _)) = s.accept {
        out.push(a);
    }
    if let Some((_, _, r, _)) = s.refuse {
        out.extend(optimize_step(&r, setup)?);
    }
    Ok(out)
}

/// One leaf of the case discussion.
#[derive(Debug, Clone)]
pub struct Case {
    pub index: usize,
    /// Tree node of the leaf.
    pub node: usize,
    pub system: ConstraintSystem,
    pub g: SourceCfg,
    pub lambda: Vec<String>,
    pub applied: Vec<String>,
    pub trail: String,
    /// A point of the box satisfying `system`, when the search found one.
    pub witness: Option<BTreeMap<String, Rat>>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub cases: Vec<Case>,
    pub tree: DecisionTree,
}

/// Runs the search to completion from `q`.
pub fn comprehensive_optimize(q: Quintuple, setup: &Setup) -> Result<Outcome, EngineError> {
    let verdict = setup.check(&q.c)?;
    let tree = tree::grow(q, verdict, setup)?;
    let cases = tree
        .leaves()
        .into_iter()
        .enumerate()
        .map(|(index, n)| {
            let node = &tree.nodes[n];
            let q = node.state.clone();
            Case {
                index,
                node: n,
                trail: strategies::trail(&q.applied, !q.g.cache().is_empty()),
                system: q.c,
                g: q.g,
                lambda: q.lambda,
                applied: q.applied,
                witness: node.witness.clone(),
            }
        })
        .collect();
    Ok(Outcome { cases, tree })
}

/// Convenience driver: set up from a machine description and run.
pub fn run(g: &SourceCfg, spec: &MachineSpec) -> Result<(Setup, Outcome), EngineError> {
    let setup = Setup::new(g, spec);
    let q = Quintuple::initial(g.clone(), &setup);
    let out = comprehensive_optimize(q, &setup)?;
    Ok((setup, out))
}
