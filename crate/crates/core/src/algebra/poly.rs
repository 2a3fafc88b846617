//! Sparse multivariate polynomials with exact rational coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::AlgebraError;
use crate::dsl::{BinOp, Expr, UnOp};

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// A power product; variables sorted by name, exponents positive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(Vec::new())
    }

    pub fn var(name: &str) -> Monomial {
        Monomial(vec![(name.to_string(), 1)])
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, v: &str) -> u32 {
        self.0
            .iter()
            .find(|(n, _)| n == v)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn factors(&self) -> &[(String, u32)] {
        &self.0
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: BTreeMap<&str, u32> = BTreeMap::new();
        for (n, e) in self.0.iter().chain(&other.0) {
            *out.entry(n).or_default() += e;
        }
        Monomial(out.into_iter().map(|(n, e)| (n.to_string(), e)).collect())
    }

    /// The monomial with `v` removed, if `v` occurs with exponent one.
    fn without(&self, v: &str) -> Monomial {
        Monomial(self.0.iter().filter(|(n, _)| n != v).cloned().collect())
    }

    /// Graded lexicographic comparison; variables ranked by `order`, then
    /// by name for those not listed. Higher monomials compare `Less` so that
    /// sorting puts them first.
    pub fn cmp_grlex(&self, other: &Monomial, order: &[String]) -> Ordering {
        let rank = |n: &str| {
            order
                .iter()
                .position(|o| o == n)
                .map(|i| (0, i, String::new()))
                .unwrap_or((1, 0, n.to_string()))
        };
        other.degree().cmp(&self.degree()).then_with(|| {
            let mut names: Vec<&str> = self
                .0
                .iter()
                .chain(&other.0)
                .map(|(n, _)| n.as_str())
                .collect();
            names.sort_by_key(|n| rank(n));
            names.dedup();
            for n in names {
                let c = other.exponent(n).cmp(&self.exponent(n));
                if c != Ordering::Equal {
                    return c;
                }
            }
            Ordering::Equal
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rat>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn one() -> Poly {
        Poly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn int(c: i64) -> Poly {
        Poly::constant(rat(c))
    }

    pub fn var(name: &str) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::var(name), Rat::one());
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rat)>) -> Poly {
        let mut p = Poly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(m).or_insert_with(Rat::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.retain(|_, c| !c.is_zero());
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    /// Number of terms.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn constant_term(&self) -> Rat {
        self.terms
            .get(&Monomial::one())
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    pub fn as_constant(&self) -> Option<Rat> {
        self.is_constant().then(|| self.constant_term())
    }

    /// The polynomial without its constant term.
    pub fn non_constant(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| !m.is_one())
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: &str) -> u32 {
        self.terms.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(n, _)| n.clone()))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.terms.keys().any(|m| m.exponent(v) > 0)
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        Poly::from_terms(self.terms.iter().map(|(m, k)| (m.clone(), k * c)))
    }

    /// Splits `self` as `a * v + rest` when `v` occurs at most linearly.
    pub fn linear_in(&self, v: &str) -> Option<(Poly, Poly)> {
        if self.degree_in(v) > 1 {
            return None;
        }
        let mut a = Poly::zero();
        let mut rest = Poly::zero();
        for (m, c) in &self.terms {
            if m.exponent(v) == 1 {
                a.add_term(m.without(v), c.clone());
            } else {
                rest.add_term(m.clone(), c.clone());
            }
        }
        Some((a, rest))
    }

    pub fn eval(&self, env: &BTreeMap<String, Rat>) -> Result<Rat, AlgebraError> {
        let mut sum = Rat::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (n, e) in &m.0 {
                let v = env
                    .get(n)
                    .ok_or_else(|| AlgebraError::MissingIndeterminate(n.clone()))?;
                for _ in 0..*e {
                    t *= v;
                }
            }
            sum += t;
        }
        Ok(sum)
    }

    pub fn eval_int(&self, env: &BTreeMap<String, i64>) -> Result<Rat, AlgebraError> {
        let env: BTreeMap<String, Rat> = env.iter().map(|(k, v)| (k.clone(), rat(*v))).collect();
        self.eval(&env)
    }

    pub fn substitute(&self, v: &str, by: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            let mut t = Poly::from_terms([(m.without(v), c.clone())]);
            for _ in 0..e {
                t = &t * by;
            }
            out = &out + &t;
        }
        out
    }

    /// Coefficient-wise maximum: an upper bound of both operands wherever all
    /// monomials are nonnegative, which holds over the parameter box.
    pub fn coefficient_max(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for m in self.terms.keys().chain(other.terms.keys()) {
            if out.terms.contains_key(m) {
                continue;
            }
            let a = self.terms.get(m).cloned().unwrap_or_else(Rat::zero);
            let b = other.terms.get(m).cloned().unwrap_or_else(Rat::zero);
            out.add_term(m.clone(), a.max(b));
        }
        out
    }

    /// Least common multiple of the coefficient denominators, and gcd of
    /// the numerators after scaling by it.
    pub fn content(&self) -> (BigInt, BigInt) {
        let mut l = BigInt::one();
        for c in self.terms.values() {
            l = l.lcm(c.denom());
        }
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            let n = (c * Rat::from_integer(l.clone())).to_integer();
            g = g.gcd(&n);
        }
        (l, g)
    }

    /// Positive multiple with coprime integer coefficients.
    pub fn primitive(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let (l, g) = self.content();
        self.scale(&Rat::new(l, g))
    }

    /// Terms sorted graded-lexicographically under `order`.
    pub fn sorted_terms(&self, order: &[String]) -> Vec<(&Monomial, &Rat)> {
        let mut ts: Vec<_> = self.terms.iter().collect();
        ts.sort_by(|a, b| a.0.cmp_grlex(b.0, order));
        ts
    }

    pub fn to_string_ordered(&self, order: &[String]) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, (m, c)) in self.sorted_terms(order).into_iter().enumerate() {
            let neg = c.is_negative();
            if i == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            s.push_str(&term_string(m, &c.abs(), order));
        }
        s
    }

    /// Converts an integer expression. Division is accepted only by a
    /// nonzero constant and is exact; `%` and comparisons are rejected.
    pub fn from_expr(e: &Expr) -> Result<Poly, AlgebraError> {
        Ok(match e {
            Expr::Int(n) => Poly::int(*n),
            Expr::Var(v) => Poly::var(v),
            Expr::Unary(UnOp::Neg, x) => -&Poly::from_expr(x)?,
            Expr::Binary(op, l, r) => {
                let (a, b) = (Poly::from_expr(l)?, Poly::from_expr(r)?);
                match op {
                    BinOp::Add => &a + &b,
                    BinOp::Sub => &a - &b,
                    BinOp::Mul => &a * &b,
                    BinOp::Div => match b.as_constant() {
                        Some(c) if !c.is_zero() => a.scale(&c.recip()),
                        _ => return Err(AlgebraError::NotPolynomial(crate::dsl::expr_to_string(e))),
                    },
                    _ => return Err(AlgebraError::NotPolynomial(crate::dsl::expr_to_string(e))),
                }
            }
            _ => return Err(AlgebraError::NotPolynomial(crate::dsl::expr_to_string(e))),
        })
    }

    /// Back to an expression tree; rational coefficients become divisions.
    pub fn to_expr(&self, order: &[String]) -> Expr {
        let mut acc: Option<Expr> = None;
        for (m, c) in self.sorted_terms(order) {
            let mut factors: Vec<Expr> = Vec::new();
            let a = c.abs();
            if !a.numer().is_one() || m.is_one() {
                factors.push(Expr::Int(a.numer().to_i64().unwrap_or(i64::MAX)));
            }
            for (n, e) in sorted_factors(m, order) {
                for _ in 0..e {
                    factors.push(Expr::var(n.clone()));
                }
            }
            let mut t = factors
                .into_iter()
                .reduce(|x, y| Expr::bin(BinOp::Mul, x, y))
                .unwrap();
            if !a.denom().is_one() {
                t = Expr::bin(
                    BinOp::Div,
                    t,
                    Expr::Int(a.denom().to_i64().unwrap_or(i64::MAX)),
                );
            }
            acc = Some(match acc {
                None if c.is_negative() => Expr::Unary(UnOp::Neg, Box::new(t)),
                None => t,
                Some(x) if c.is_negative() => Expr::bin(BinOp::Sub, x, t),
                Some(x) => Expr::bin(BinOp::Add, x, t),
            });
        }
        acc.unwrap_or(Expr::Int(0))
    }
}

fn sorted_factors(m: &Monomial, order: &[String]) -> Vec<(String, u32)> {
    let mut fs = m.0.clone();
    fs.sort_by_key(|(n, _)| {
        order
            .iter()
            .position(|o| o == n)
            .map(|i| (0, i, String::new()))
            .unwrap_or((1, 0, n.clone()))
    });
    fs
}

/// `c*m` for a positive coefficient; powers are written as repeated
/// products so the text parses back as a DSL expression.
fn term_string(m: &Monomial, c: &Rat, order: &[String]) -> String {
    let mut parts: Vec<String> = Vec::new();
    if !c.is_one() || m.is_one() {
        parts.push(c.to_string());
    }
    for (n, e) in sorted_factors(m, order) {
        for _ in 0..e {
            parts.push(n.clone());
        }
    }
    parts.join("*")
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_ordered(&[]))
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

macro_rules! owned_ops {
    ($($tr:ident $f:ident),*) => {$(
        impl $tr for Poly {
            type Output = Poly;
            fn $f(self, rhs: Poly) -> Poly {
                (&self).$f(&rhs)
            }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_expr;

    fn p(s: &str) -> Poly {
        Poly::from_expr(&parse_expr(s).unwrap()).unwrap()
    }

    fn env(kv: &[(&str, i64)]) -> BTreeMap<String, i64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(p("2*s*B + 2").eval_int(&env(&[("s", 4), ("B", 16)])).unwrap(), rat(130));
        assert_eq!(Poly::zero().eval_int(&env(&[])).unwrap(), rat(0));
        assert_eq!(p("B0*B1").eval_int(&env(&[("B0", 16), ("B1", 8)])).unwrap(), rat(128));
    }

    #[test]
    fn missing_indeterminate() {
        assert!(matches!(
            p("x + y").eval_int(&env(&[("x", 1)])),
            Err(AlgebraError::MissingIndeterminate(v)) if v == "y"
        ));
    }

    #[test]
    fn canonical_equality() {
        assert_eq!(&(&p("x*y + 3") + &p("y*y")) - &p("y*y"), p("3 + y*x"));
        assert_eq!(p("(a+b)*(a-b)"), p("a*a - b*b"));
        assert!((&p("x") - &p("x")).is_zero());
    }

    #[test]
    fn graded_order_display() {
        let order: Vec<String> = ["s", "B"].iter().map(|s| s.to_string()).collect();
        assert_eq!(p("2 + B*s*2").to_string_ordered(&order), "2*s*B + 2");
        assert_eq!(p("B - s*s").to_string_ordered(&order), "-s*s + B");
        assert_eq!(p("x/2").to_string(), "1/2*x");
    }

    #[test]
    fn non_polynomial_rejected() {
        assert!(Poly::from_expr(&parse_expr("N / B").unwrap()).is_err());
        assert!(Poly::from_expr(&parse_expr("N % 2").unwrap()).is_err());
    }

    #[test]
    fn expr_round_trip() {
        let order = vec![];
        for s in ["2*s*B + 2", "-x + 3", "x*x*y - 7", "0"] {
            let q = p(s);
            assert_eq!(Poly::from_expr(&q.to_expr(&order)).unwrap(), q);
        }
    }

    #[test]
    fn coefficient_max_dominates() {
        let a = p("2*s*B + 2");
        let b = p("3*B");
        assert_eq!(a.coefficient_max(&b), p("2*s*B + 3*B + 2"));
    }
}
