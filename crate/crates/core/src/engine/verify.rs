//! Checks of a finished run: coverage of the parameter space, optimality
//! of each counter at some leaf, and exact validation of the witnesses.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Case, DecisionTree, EdgeKind, EngineError, Setup};
use crate::algebra::{ParamBox, Poly, Verdict};
use crate::counters::{self, CounterDef};
use crate::strategies::{self, StrategyError, Target};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageReport {
    pub samples: usize,
    /// Sampled program and data parameter values no case admits.
    pub uncovered: Vec<BTreeMap<String, i64>>,
    /// Points where the search gave up before deciding.
    pub undecided: Vec<BTreeMap<String, i64>>,
}

impl CoverageReport {
    pub fn is_ok(&self) -> bool {
        self.uncovered.is_empty() && self.undecided.is_empty()
    }
}

/// Samples program and data parameter values in the box and checks that
/// some case can be met by machine parameter values in the box. Machine
/// parameters listed in `fixed` take the given value instead.
pub fn verify_coverage(
    cases: &[Case],
    setup: &Setup,
    samples: usize,
    seed: u64,
    fixed: &BTreeMap<String, i64>,
) -> Result<CoverageReport, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut machine = ParamBox::new();
    for p in setup.resource_params.iter().filter(|p| !fixed.contains_key(*p)) {
        let (lo, hi) = setup.bx.ints[p];
        machine = machine.with(p, lo, hi);
    }
    for p in setup.perf_params.iter().filter(|p| !fixed.contains_key(*p)) {
        machine = machine.with_real(p);
    }
    let free: Vec<&String> = setup.program_params.iter().chain(&setup.data_params).collect();
    let mut report = CoverageReport { samples, ..Default::default() };
    for _ in 0..samples {
        let point: BTreeMap<String, i64> = free
            .iter()
            .map(|p| {
                let (lo, hi) = setup.bx.ints[*p];
                ((*p).clone(), rng.gen_range(lo..=hi))
            })
            .collect();
        let full: BTreeMap<&String, i64> = point.iter().chain(fixed).map(|(k, v)| (k, *v)).collect();
        let mut undecided = false;
        let mut covered = false;
        for case in cases {
            let cs: Vec<_> = case
                .system
                .constraints()
                .iter()
                .map(|c| full.iter().fold(c.clone(), |c, (v, x)| c.substitute(v, &Poly::int(*x))))
                .collect();
            match crate::algebra::check_consistency(&cs, &machine, &setup.search)? {
                Verdict::Consistent(_) => {
                    covered = true;
                    break;
                }
                Verdict::Unknown { .. } => undecided = true,
                Verdict::Inconsistent(_) => {}
            }
        }
        if !covered {
            if undecided {
                report.undecided.push(point);
            } else {
                report.uncovered.push(point);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OptimalityReport {
    /// For each counter, the first case at which it is optimal.
    pub optimal_at: Vec<(String, Option<usize>)>,
}

impl OptimalityReport {
    pub fn is_ok(&self) -> bool {
        self.optimal_at.iter().all(|(_, c)| c.is_some())
    }

    pub fn failures(&self) -> Vec<&str> {
        self.optimal_at.iter().filter(|(_, c)| c.is_none()).map(|(id, _)| id.as_str()).collect()
    }
}

/// Whether no strategy of the counter's set changes its value at `case`.
pub fn is_optimal(def: &CounterDef, case: &Case, setup: &Setup) -> Result<bool, EngineError> {
    let err = |source| EngineError::Counter {
        counter: def.id.clone(),
        path: case.applied.join(", "),
        source,
    };
    let here = counters::evaluate(def, &case.g, &case.lambda, &setup.config).map_err(err)?.value;
    for sid in &def.sigma {
        let Some(info) = strategies::info(sid) else { continue };
        let after = match info.target {
            Target::Ir => {
                let mut lambda = case.lambda.clone();
                lambda.push(sid.clone());
                counters::evaluate(def, &case.g, &lambda, &setup.config).map_err(err)?.value
            }
            Target::Source => match strategies::apply_source(sid, &case.g) {
                Ok(g) => counters::evaluate(def, &g, &case.lambda, &setup.config).map_err(err)?.value,
                Err(StrategyError::Inapplicable { .. }) => continue,
                Err(source) => {
                    return Err(EngineError::Strategy {
                        strategy: sid.clone(),
                        path: case.applied.join(", "),
                        source,
                    })
                }
            },
        };
        if after != here {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn verify_optimality(cases: &[Case], setup: &Setup) -> Result<OptimalityReport, EngineError> {
    let mut report = OptimalityReport::default();
    for def in &setup.counters {
        let mut at = None;
        for case in cases {
            if is_optimal(def, case, setup)? {
                at = Some(case.index);
                break;
            }
        }
        report.optimal_at.push((def.id.clone(), at));
    }
    Ok(report)
}

/// From the root, follows a refuse edge when its strategy is in `wanted`
/// and the accept edge otherwise. Returns the leaf reached, if any.
pub fn walk_subset(tree: &DecisionTree, wanted: &[String]) -> Option<usize> {
    let mut n = 0;
    loop {
        if tree.nodes[n].case.is_some() {
            return Some(n);
        }
        let refuse = tree.child(n, EdgeKind::Refuse);
        let next = match refuse {
            Some(e) if e.strategy.as_ref().is_some_and(|s| wanted.contains(s)) => e,
            _ => tree.child(n, EdgeKind::Accept)?,
        };
        n = next.to;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SoundnessReport {
    /// Cases without a witness.
    pub missing: Vec<usize>,
    /// Cases whose witness violates one of their constraints.
    pub violated: Vec<usize>,
}

impl SoundnessReport {
    pub fn is_ok(&self) -> bool {
        self.missing.is_empty() && self.violated.is_empty()
    }
}

/// Re-evaluates every witness exactly against its case's constraints.
pub fn verify_witnesses(cases: &[Case]) -> SoundnessReport {
    let mut r = SoundnessReport::default();
    for c in cases {
        match &c.witness {
            None => r.missing.push(c.index),
            Some(w) => {
                let ok = c.system.constraints().iter().all(|k| k.holds(w).unwrap_or(false));
                if !ok {
                    r.violated.push(c.index);
                }
            }
        }
    }
    r
}
