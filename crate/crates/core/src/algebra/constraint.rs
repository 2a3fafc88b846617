//! Polynomial equations and inequalities in the normal form `p rel 0`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use super::poly::{Poly, Rat};
use super::AlgebraError;
use crate::dsl::{parse_expr, BinOp, Expr};

/// Relation as written by a caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

/// Relation of a normalized constraint against zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Eq,
    Le,
    Lt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Le => "<=",
            Rel::Lt => "<",
        }
    }

    pub fn holds(self, v: &Rat) -> bool {
        match self {
            Rel::Eq => v.is_zero(),
            Rel::Le => !v.is_positive(),
            Rel::Lt => v.is_negative(),
        }
    }
}

/// `poly rel 0`, with `poly` scaled to coprime integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    poly: Poly,
    rel: Rel,
}

impl Constraint {
    pub fn new(lhs: &Poly, rel: Relation, rhs: &Poly) -> Constraint {
        let (poly, rel) = match rel {
            Relation::Eq => (lhs - rhs, Rel::Eq),
            Relation::Le => (lhs - rhs, Rel::Le),
            Relation::Lt => (lhs - rhs, Rel::Lt),
            Relation::Ge => (rhs - lhs, Rel::Le),
            Relation::Gt => (rhs - lhs, Rel::Lt),
        };
        Constraint::normalized(poly, rel)
    }

    fn normalized(poly: Poly, rel: Rel) -> Constraint {
        let mut poly = poly.primitive();
        if rel == Rel::Eq
            && poly
                .sorted_terms(&[])
                .first()
                .is_some_and(|(_, c)| c.is_negative())
        {
            poly = -&poly;
        }
        Constraint { poly, rel }
    }

    pub fn le(lhs: Poly, rhs: Poly) -> Constraint {
        Constraint::new(&lhs, Relation::Le, &rhs)
    }

    pub fn lt(lhs: Poly, rhs: Poly) -> Constraint {
        Constraint::new(&lhs, Relation::Lt, &rhs)
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn rel(&self) -> Rel {
        self.rel
    }

    pub fn vars(&self) -> Vec<String> {
        self.poly.vars()
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.poly.mentions(v)
    }

    /// The complement, when it is a single constraint (not for equations).
    pub fn negate(&self) -> Option<Constraint> {
        let rel = match self.rel {
            Rel::Eq => return None,
            Rel::Le => Rel::Lt,
            Rel::Lt => Rel::Le,
        };
        Some(Constraint::normalized(-&self.poly, rel))
    }

    pub fn holds(&self, env: &BTreeMap<String, Rat>) -> Result<bool, AlgebraError> {
        Ok(self.rel.holds(&self.poly.eval(env)?))
    }

    pub fn holds_int(&self, env: &BTreeMap<String, i64>) -> Result<bool, AlgebraError> {
        Ok(self.rel.holds(&self.poly.eval_int(env)?))
    }

    /// The constraint with `v` replaced by `by`.
    pub fn substitute(&self, v: &str, by: &Poly) -> Constraint {
        Constraint::normalized(self.poly.substitute(v, by), self.rel)
    }

    /// Parses `lhs op rhs` with op one of `=`, `==`, `<=`, `<`, `>=`, `>`.
    pub fn parse(text: &str) -> Result<Constraint, AlgebraError> {
        let bad = |m: &str| AlgebraError::Parse(format!("`{text}`: {m}"));
        let text_eq = match split_single_eq(text) {
            Some((l, r)) => format!("{l} == {r}"),
            None => text.to_string(),
        };
        let e = parse_expr(&text_eq).map_err(|e| bad(&e.to_string()))?;
        let Expr::Binary(op, l, r) = e else {
            return Err(bad("expected a comparison"));
        };
        let rel = match op {
            BinOp::Eq => Relation::Eq,
            BinOp::Le => Relation::Le,
            BinOp::Lt => Relation::Lt,
            BinOp::Ge => Relation::Ge,
            BinOp::Gt => Relation::Gt,
            _ => return Err(bad("expected a comparison")),
        };
        let l = Poly::from_expr(&l)?;
        let r = Poly::from_expr(&r)?;
        Ok(Constraint::new(&l, rel, &r))
    }

    /// Canonical text: positive terms on the left, negated negative terms on
    /// the right, e.g. `2*s*B + 2 <= Z_B`.
    pub fn to_string_ordered(&self, order: &[String]) -> String {
        let (lhs, rhs) = self.sides();
        format!(
            "{} {} {}",
            lhs.to_string_ordered(order),
            self.rel.symbol(),
            rhs.to_string_ordered(order)
        )
    }

    /// `(lhs, rhs)` with nonnegative coefficients such that the constraint
    /// reads `lhs rel rhs`.
    pub fn sides(&self) -> (Poly, Poly) {
        let pos = Poly::from_terms(
            self.poly
                .terms()
                .filter(|(_, c)| c.is_positive())
                .map(|(m, c)| (m.clone(), c.clone())),
        );
        let neg = &pos - &self.poly;
        (pos, neg)
    }
}

fn split_single_eq(text: &str) -> Option<(&str, &str)> {
    let b = text.as_bytes();
    for i in 0..b.len() {
        if b[i] == b'=' {
            let prev = i.checked_sub(1).map(|j| b[j]);
            let next = b.get(i + 1).copied();
            if !matches!(prev, Some(b'<' | b'>' | b'=' | b'!')) && next != Some(b'=') {
                return Some((&text[..i], &text[i + 1..]));
            }
        }
    }
    None
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_ordered(&[]))
    }
}
