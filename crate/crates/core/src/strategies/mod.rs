//! Semantics-preserving rewrites that may lower a counter's value.
//!
//! Source-level strategies rewrite the compile unit and rebuild the source
//! graph; register-pressure strategies rewrite the IR and are replayed from
//! the applied list whenever the IR is needed.

pub mod caching;
pub mod cse;
pub mod granularity;
pub mod regpressure;

use thiserror::Error;

use crate::model::{IrCfg, ModelError, SourceCfg};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Source,
    Ir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyInfo {
    pub id: &'static str,
    pub family: &'static str,
    /// Trail code printed when the strategy was applied, if any.
    pub code: Option<&'static str>,
    pub level: u8,
    pub target: Target,
}

pub const ROSTER: [StrategyInfo; 7] = [
    StrategyInfo { id: "granularity", family: "granularity", code: Some("(3b)"), level: 0, target: Target::Source },
    StrategyInfo { id: "caching-off", family: "caching", code: Some("(4b)"), level: 0, target: Target::Source },
    StrategyInfo { id: "cse-0", family: "cse", code: Some("(2)"), level: 0, target: Target::Source },
    StrategyInfo { id: "cse-1", family: "cse", code: Some("(2)"), level: 1, target: Target::Source },
    StrategyInfo { id: "regpressure-0", family: "regpressure", code: None, level: 0, target: Target::Ir },
    StrategyInfo { id: "regpressure-1", family: "regpressure", code: None, level: 1, target: Target::Ir },
    StrategyInfo { id: "regpressure-2", family: "regpressure", code: None, level: 2, target: Target::Ir },
];

pub fn info(id: &str) -> Option<&'static StrategyInfo> {
    ROSTER.iter().find(|s| s.id == id)
}

pub fn default_order() -> Vec<String> {
    ROSTER.iter().map(|s| s.id.to_string()).collect()
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error("strategy `{id}` is not applicable: {why}")]
    Inapplicable { id: String, why: String },
    #[error("unknown strategy `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn inapplicable(id: &str, why: impl Into<String>) -> StrategyError {
    StrategyError::Inapplicable {
        id: id.to_string(),
        why: why.into(),
    }
}

/// Applies a source-level strategy. IR-level strategies leave the source
/// graph as it is; their effect lives in the applied list.
pub fn apply_source(id: &str, g: &SourceCfg) -> Result<SourceCfg, StrategyError> {
    match id {
        "granularity" => granularity::reduce_granularity(g),
        "caching-off" => caching::remove_caching(g),
        "cse-0" => cse::apply_cse(g, 0),
        "cse-1" => cse::apply_cse(g, 1),
        _ if info(id).is_some() => Ok(g.clone()),
        _ => Err(StrategyError::Unknown(id.to_string())),
    }
}

pub fn apply_ir(id: &str, ir: &IrCfg) -> Result<IrCfg, ModelError> {
    match info(id) {
        Some(s) if s.target == Target::Ir => Ok(regpressure::reduce_register_pressure(ir, s.level)),
        Some(_) => Err(ModelError::NotIrStrategy(id.to_string())),
        None => Err(ModelError::UnknownStrategy(id.to_string())),
    }
}

/// Decision codes for a program that went through `applied` (in order)
/// and still has `cache_nonempty` arrays cached.
pub fn trail(applied: &[String], cache_nonempty: bool) -> String {
    let mut codes: Vec<&str> = Vec::new();
    if !applied.iter().any(|a| info(a).is_some_and(|s| s.family == "regpressure")) {
        codes.push("(1)");
    }
    for a in applied {
        if let Some(c) = info(a).and_then(|s| s.code) {
            codes.push(c);
        }
    }
    if cache_nonempty {
        codes.push("(4a)");
    }
    if !applied.iter().any(|a| a == "granularity") {
        codes.push("(3a)");
    }
    codes.join(" ")
}
