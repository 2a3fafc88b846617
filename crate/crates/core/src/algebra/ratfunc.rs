//! Quotients of polynomials, used for performance counters.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use super::poly::{Poly, Rat};
use super::AlgebraError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatFunc {
    num: Poly,
    den: Poly,
}

impl RatFunc {
    /// Builds `num / den` with integer coefficients whose overall gcd is
    /// one and a denominator whose leading coefficient is positive.
    pub fn new(num: Poly, den: Poly) -> Result<RatFunc, AlgebraError> {
        if den.is_zero() {
            return Err(AlgebraError::ZeroDenominator);
        }
        let (ln, gn) = num.content();
        let (ld, gd) = den.content();
        let l = ln.lcm(&ld);
        let scale = Rat::from_integer(l.clone());
        let (num, den) = (num.scale(&scale), den.scale(&scale));
        let g = (gn * &l / ln).gcd(&(gd * &l / ld));
        let mut inv = Rat::new(BigInt::from(1), g);
        if den
            .sorted_terms(&[])
            .first()
            .is_some_and(|(_, c)| c.is_negative())
        {
            inv = -inv;
        }
        Ok(RatFunc {
            num: num.scale(&inv),
            den: den.scale(&inv),
        })
    }

    pub fn from_poly(p: Poly) -> RatFunc {
        RatFunc::new(p, Poly::one()).expect("constant denominator")
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn eval(&self, env: &BTreeMap<String, Rat>) -> Result<Rat, AlgebraError> {
        let d = self.den.eval(env)?;
        if d.is_zero() {
            return Err(AlgebraError::ZeroDenominator);
        }
        Ok(self.num.eval(env)? / d)
    }

    pub fn to_string_ordered(&self, order: &[String]) -> String {
        let n = self.num.to_string_ordered(order);
        if self.den == Poly::one() {
            return n;
        }
        let wrap = |p: &Poly, s: String| if p.term_count() > 1 { format!("({s})") } else { s };
        format!(
            "{} / {}",
            wrap(&self.num, n),
            wrap(&self.den, self.den.to_string_ordered(order))
        )
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_ordered(&[]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::poly::rat;
    use crate::dsl::parse_expr;

    fn p(s: &str) -> Poly {
        Poly::from_expr(&parse_expr(s).unwrap()).unwrap()
    }

    #[test]
    fn content_reduction() {
        let f = RatFunc::new(p("4*x"), p("6*y + 2")).unwrap();
        assert_eq!(f.numerator(), &p("2*x"));
        assert_eq!(f.denominator(), &p("3*y + 1"));
        let g = RatFunc::new(p("x/2"), p("-y")).unwrap();
        assert_eq!(g.numerator(), &p("-x"));
        assert_eq!(g.denominator(), &p("2*y"));
    }

    #[test]
    fn zero_denominator() {
        assert!(matches!(RatFunc::new(p("x"), Poly::zero()), Err(AlgebraError::ZeroDenominator)));
        let f = RatFunc::new(p("x"), p("y - 1")).unwrap();
        let env = [("x".to_string(), rat(3)), ("y".to_string(), rat(1))].into();
        assert!(f.eval(&env).is_err());
    }

    #[test]
    fn eval_value() {
        let f = RatFunc::new(p("R"), p("r * W * M")).unwrap();
        let env = [("R", 32768), ("r", 16), ("W", 32), ("M", 64)]
            .iter()
            .map(|(k, v)| (k.to_string(), rat(*v)))
            .collect();
        assert_eq!(f.eval(&env).unwrap(), Rat::new(1.into(), 1.into()));
    }
}
