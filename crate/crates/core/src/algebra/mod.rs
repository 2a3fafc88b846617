//! Exact polynomial arithmetic, constraint systems and their consistency.

pub mod consistency;
pub mod constraint;
pub mod poly;
pub mod ratfunc;
pub mod system;

use thiserror::Error;

pub use consistency::{check_consistency, ParamBox, Reason, SearchConfig, Verdict};
pub use constraint::{Constraint, Rel, Relation};
pub use poly::{rat, Monomial, Poly, Rat};
pub use ratfunc::RatFunc;
pub use system::ConstraintSystem;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("no value for indeterminate `{0}`")]
    MissingIndeterminate(String),
    #[error("`{0}` is not a polynomial")]
    NotPolynomial(String),
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("parameter `{0}` has no bounds in the box")]
    UnboundedVariable(String),
    #[error("box entry for `{0}` is empty or negative")]
    InvalidBox(String),
    #[error("cannot parse constraint {0}")]
    Parse(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}
