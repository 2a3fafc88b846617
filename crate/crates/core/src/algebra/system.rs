//! Ordered conjunctions of constraints.

use super::consistency::{check_consistency, ParamBox, SearchConfig, Verdict};
use super::constraint::Constraint;
use super::poly::Poly;
use super::AlgebraError;

/// Constraints in push order; the last one pushed is the top of the stack.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSystem {
    constraints: Vec<Constraint>,
}

impl ConstraintSystem {
    pub fn new() -> ConstraintSystem {
        ConstraintSystem::default()
    }

    /// `0 <= P <= 1` for each performance parameter and `0 <= x` for every
    /// other parameter.
    pub fn init<'a>(
        perf: impl IntoIterator<Item = &'a String>,
        nonneg: impl IntoIterator<Item = &'a String>,
    ) -> ConstraintSystem {
        let mut s = ConstraintSystem::new();
        for p in perf {
            s = s.push(Constraint::le(Poly::zero(), Poly::var(p)));
            s = s.push(Constraint::le(Poly::var(p), Poly::one()));
        }
        for x in nonneg {
            s = s.push(Constraint::le(Poly::zero(), Poly::var(x)));
        }
        s
    }

    /// A copy extended by `c`, unless an identical constraint is present.
    pub fn push(&self, c: Constraint) -> ConstraintSystem {
        let mut out = self.clone();
        if !out.constraints.contains(&c) {
            out.constraints.push(c);
        }
        out
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.constraints.contains(c)
    }

    pub fn check(&self, bx: &ParamBox, cfg: &SearchConfig) -> Result<Verdict, AlgebraError> {
        check_consistency(&self.constraints, bx, cfg)
    }

    /// Whether `c` follows from this system over the box, i.e. adding its
    /// negation leaves nothing. Equations are never reported as implied.
    pub fn implies(&self, c: &Constraint, bx: &ParamBox, cfg: &SearchConfig) -> Result<bool, AlgebraError> {
        match c.negate() {
            Some(n) => Ok(self.push(n).check(bx, cfg)?.is_inconsistent()),
            None => Ok(false),
        }
    }

    pub fn to_strings(&self, order: &[String]) -> Vec<String> {
        self.constraints.iter().map(|c| c.to_string_ordered(order)).collect()
    }
}
