//! Machine descriptions: machine parameters, counters and the strategy
//! roster, read from a TOML file.

use std::collections::BTreeSet;

use serde::Deserialize;
use thiserror::Error;

use crate::counters::{CounterConfig, CounterDef, CounterKind, Measure, OccupancyModel};
use crate::strategies;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    ResourceLimit,
    PerformanceRatio,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineParam {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterEntry {
    pub id: String,
    pub measure: Measure,
    pub bound: String,
    pub sigma: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub name: String,
    #[serde(default = "default_stride")]
    pub grid_stride: i64,
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_stride() -> i64 {
    256
}

fn default_budget() -> u64 {
    2_000_000
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strategies {
    pub order: Vec<String>,
}

impl Default for Strategies {
    fn default() -> Self {
        Strategies { order: strategies::default_order() }
    }
}

/// Ranges for the program's own parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRanges {
    #[serde(default = "default_data")]
    pub data: (i64, i64),
    #[serde(default = "default_program")]
    pub program: (i64, i64),
}

fn default_data() -> (i64, i64) {
    (1, 4096)
}

fn default_program() -> (i64, i64) {
    (1, 32)
}

impl Default for BoxRanges {
    fn default() -> Self {
        BoxRanges { data: default_data(), program: default_program() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Estimator {
    #[serde(default)]
    pub register_overhead: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occupancy {
    pub register_file: String,
    pub warp_size: i64,
    pub max_warps: i64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub machine: Header,
    #[serde(default, rename = "param")]
    pub params: Vec<MachineParam>,
    #[serde(default, rename = "counter")]
    pub counters: Vec<CounterEntry>,
    #[serde(default)]
    pub strategies: Strategies,
    #[serde(default, rename = "box")]
    pub ranges: BoxRanges,
    #[serde(default)]
    pub estimator: Estimator,
    pub occupancy: Option<Occupancy>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MachineError {
    #[error("machine file: {0}")]
    Toml(String),
    #[error("machine parameter `{0}` is declared twice")]
    DuplicateParam(String),
    #[error("machine parameter `{name}` has bounds [{min}, {max}]; {why}")]
    BadBounds { name: String, min: f64, max: f64, why: &'static str },
    #[error("counter `{counter}` is bounded by `{bound}`, which is not a declared {expected} parameter")]
    BadBound { counter: String, bound: String, expected: &'static str },
    #[error("counter `{0}` has an empty strategy set")]
    EmptySigma(String),
    #[error("counter `{0}` is declared twice")]
    DuplicateCounter(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("strategy `{0}` appears twice in the roster")]
    DuplicateStrategy(String),
    #[error("occupancy counter `{0}` needs an [occupancy] section")]
    MissingOccupancy(String),
    #[error("occupancy register file `{0}` is not a declared resource parameter")]
    BadRegisterFile(String),
    #[error("box range {0} is empty or negative")]
    BadRange(&'static str),
}

impl MachineSpec {
    pub fn parse(text: &str) -> Result<MachineSpec, MachineError> {
        let spec: MachineSpec = toml::from_str(text).map_err(|e| MachineError::Toml(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MachineError> {
        let mut seen = BTreeSet::new();
        for p in &self.params {
            if !seen.insert(&p.name) {
                return Err(MachineError::DuplicateParam(p.name.clone()));
            }
            let bad = |why| MachineError::BadBounds { name: p.name.clone(), min: p.min, max: p.max, why };
            if !(p.min.is_finite() && p.max.is_finite()) || p.min < 0.0 || p.min > p.max {
                return Err(bad("bounds must be finite, non-negative and ordered"));
            }
            match p.kind {
                ParamKind::ResourceLimit if p.min.fract() != 0.0 || p.max.fract() != 0.0 => {
                    return Err(bad("resource limits are integers"))
                }
                ParamKind::PerformanceRatio if p.max > 1.0 => return Err(bad("ratios lie in [0, 1]")),
                _ => {}
            }
        }
        let mut ids = BTreeSet::new();
        for c in &self.counters {
            if !ids.insert(&c.id) {
                return Err(MachineError::DuplicateCounter(c.id.clone()));
            }
            let (kind, expected) = match c.measure.kind() {
                CounterKind::Resource => (ParamKind::ResourceLimit, "resource-limit"),
                CounterKind::Performance => (ParamKind::PerformanceRatio, "performance-ratio"),
            };
            if !self.params.iter().any(|p| p.name == c.bound && p.kind == kind) {
                return Err(MachineError::BadBound { counter: c.id.clone(), bound: c.bound.clone(), expected });
            }
            if c.sigma.is_empty() {
                return Err(MachineError::EmptySigma(c.id.clone()));
            }
            for s in &c.sigma {
                if strategies::info(s).is_none() {
                    return Err(MachineError::UnknownStrategy(s.clone()));
                }
            }
            if c.measure == Measure::Occupancy && self.occupancy.is_none() {
                return Err(MachineError::MissingOccupancy(c.id.clone()));
            }
        }
        let mut roster = BTreeSet::new();
        for s in &self.strategies.order {
            if strategies::info(s).is_none() {
                return Err(MachineError::UnknownStrategy(s.clone()));
            }
            if !roster.insert(s) {
                return Err(MachineError::DuplicateStrategy(s.clone()));
            }
        }
        if let Some(o) = &self.occupancy {
            if !self.params.iter().any(|p| p.name == o.register_file && p.kind == ParamKind::ResourceLimit) {
                return Err(MachineError::BadRegisterFile(o.register_file.clone()));
            }
        }
        for (what, (lo, hi)) in [("data", self.ranges.data), ("program", self.ranges.program)] {
            if lo < 0 || lo > hi {
                return Err(MachineError::BadRange(what));
            }
        }
        Ok(())
    }

    /// The built-in Fermi-class profile.
    pub fn fermi() -> MachineSpec {
        MachineSpec::parse(FERMI).expect("built-in machine is valid")
    }

    pub fn counter_defs(&self) -> Vec<CounterDef> {
        self.counters
            .iter()
            .map(|c| CounterDef {
                id: c.id.clone(),
                measure: c.measure,
                bound: c.bound.clone(),
                sigma: c.sigma.clone(),
            })
            .collect()
    }

    pub fn counter_config(&self) -> CounterConfig {
        CounterConfig {
            register_overhead: self.estimator.register_overhead,
            occupancy: self.occupancy.as_ref().map(|o| OccupancyModel {
                register_file: o.register_file.clone(),
                warp_size: o.warp_size,
                max_warps: o.max_warps,
            }),
        }
    }

    pub fn param(&self, name: &str) -> Option<&MachineParam> {
        self.params.iter().find(|p| p.name == name)
    }
}

pub const FERMI: &str = include_str!("../machines/fermi.machine");
