//! Symbolic resource and performance counters.

pub mod footprint;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, Poly, RatFunc};
use crate::model::{compute_liveness, lower_to_ir, ModelError, SourceCfg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterKind {
    Resource,
    Performance,
}

/// The quantities a counter can measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    SharedWords,
    Registers,
    ThreadsPerBlock,
    Occupancy,
}

impl Measure {
    pub fn kind(self) -> CounterKind {
        match self {
            Measure::Occupancy => CounterKind::Performance,
            _ => CounterKind::Resource,
        }
    }

    pub fn on_ir(self) -> bool {
        matches!(self, Measure::Registers | Measure::Occupancy)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterDef {
    pub id: String,
    pub measure: Measure,
    /// Machine parameter bounding the value.
    pub bound: String,
    /// Strategies that may lower the value, in roster order.
    pub sigma: Vec<String>,
}

impl CounterDef {
    pub fn kind(&self) -> CounterKind {
        self.measure.kind()
    }
}

/// Estimator knobs that do not depend on the program.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CounterConfig {
    /// Added to maxlive for the register estimate.
    pub register_overhead: i64,
    pub occupancy: Option<OccupancyModel>,
}

/// Occupancy = register file / (registers per thread * warp size * max
/// warps), before clamping to 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyModel {
    /// Machine parameter holding the register file size.
    pub register_file: String,
    pub warp_size: i64,
    pub max_warps: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Poly(Poly),
    Ratio(RatFunc),
}

impl Value {
    pub fn as_poly(&self) -> Option<&Poly> {
        match self {
            Value::Poly(p) => Some(p),
            Value::Ratio(_) => None,
        }
    }

    /// Numerator and positive denominator.
    pub fn parts(&self) -> (Poly, Poly) {
        match self {
            Value::Poly(p) => (p.clone(), Poly::one()),
            Value::Ratio(r) => (r.numerator().clone(), r.denominator().clone()),
        }
    }

    pub fn to_string_ordered(&self, order: &[String]) -> String {
        match self {
            Value::Poly(p) => p.to_string_ordered(order),
            Value::Ratio(r) => r.to_string_ordered(order),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterValue {
    pub counter: String,
    pub value: Value,
    /// Accesses or notes that determined the value.
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CounterError {
    #[error("cached access `{access}` is not affine in the block-local indices")]
    NonAffine { access: String },
    #[error("thread loop bound `{0}` is not a polynomial")]
    BadThreadBound(String),
    #[error("occupancy needs an occupancy model in the machine description")]
    NoOccupancyModel,
    #[error("occupancy denominator `{0}` is not positive")]
    NonPositiveDenominator(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

pub fn registers_per_thread(g: &SourceCfg, applied: &[String], cfg: &CounterConfig) -> Result<CounterValue, CounterError> {
    let ir = lower_to_ir(g, applied)?;
    let live = compute_liveness(&ir);
    Ok(CounterValue {
        counter: "registers".into(),
        value: Value::Poly(Poly::int(live.maxlive as i64 + cfg.register_overhead)),
        trace: vec![format!("maxlive {}", live.maxlive)],
    })
}

pub fn shared_words_per_block(g: &SourceCfg) -> Result<CounterValue, CounterError> {
    let (p, trace) = footprint::shared_words(g)?;
    Ok(CounterValue {
        counter: "shared-words".into(),
        value: Value::Poly(p),
        trace,
    })
}

pub fn threads_per_block(g: &SourceCfg) -> Result<CounterValue, CounterError> {
    let mut p = Poly::one();
    let mut trace = Vec::new();
    for l in g.nest().thread_loops() {
        let e = g.params().expand_all(&l.bound);
        let b = Poly::from_expr(&e).map_err(|_| CounterError::BadThreadBound(crate::dsl::expr_to_string(&l.bound)))?;
        trace.push(format!("{} < {}", l.var, b));
        p = p * b;
    }
    Ok(CounterValue {
        counter: "threads-per-block".into(),
        value: Value::Poly(p),
        trace,
    })
}

pub fn occupancy(regs: &CounterValue, model: &OccupancyModel) -> Result<CounterValue, CounterError> {
    let r = regs.value.as_poly().cloned().unwrap_or_else(Poly::zero);
    let value = if r.is_zero() {
        RatFunc::from_poly(Poly::one())
    } else {
        let den = r.clone() * Poly::int(model.warp_size * model.max_warps);
        if den.as_constant().is_some_and(|c| c <= crate::algebra::rat(0)) {
            return Err(CounterError::NonPositiveDenominator(den.to_string()));
        }
        RatFunc::new(Poly::var(&model.register_file), den)?
    };
    Ok(CounterValue {
        counter: "occupancy".into(),
        value: Value::Ratio(value),
        trace: vec![format!("registers {r}")],
    })
}

/// Evaluates `def` on the program `(g, applied)`.
pub fn evaluate(def: &CounterDef, g: &SourceCfg, applied: &[String], cfg: &CounterConfig) -> Result<CounterValue, CounterError> {
    let mut v = match def.measure {
        Measure::SharedWords => shared_words_per_block(g)?,
        Measure::Registers => registers_per_thread(g, applied, cfg)?,
        Measure::ThreadsPerBlock => threads_per_block(g)?,
        Measure::Occupancy => {
            let model = cfg.occupancy.as_ref().ok_or(CounterError::NoOccupancyModel)?;
            occupancy(&registers_per_thread(g, applied, cfg)?, model)?
        }
    };
    v.counter = def.id.clone();
    Ok(v)
}
