//! Dropping the `cache` clause so cached arrays are accessed in global
//! memory.

use super::{inapplicable, StrategyError};
use crate::model::SourceCfg;

pub fn remove_caching(g: &SourceCfg) -> Result<SourceCfg, StrategyError> {
    if g.cache().is_empty() {
        return Err(inapplicable("caching-off", "the cache clause is already empty"));
    }
    let p = g.program().map_schedule(|_, body| (Vec::new(), body.clone()));
    Ok(g.with_program(p)?)
}
