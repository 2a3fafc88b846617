//! Local algebraic clean-up of expressions: constant folding and unit laws.

use super::ast::{BinOp, Expr, UnOp};

/// C-style truncating division, `None` on a zero divisor or overflow.
pub fn c_div(a: i64, b: i64) -> Option<i64> {
    if b == 0 {
        None
    } else {
        a.checked_div(b)
    }
}

pub fn c_rem(a: i64, b: i64) -> Option<i64> {
    if b == 0 {
        None
    } else {
        a.checked_rem(b)
    }
}

pub fn fold_binop(op: BinOp, a: i64, b: i64) -> Option<i64> {
    Some(match op {
        BinOp::Add => a.checked_add(b)?,
        BinOp::Sub => a.checked_sub(b)?,
        BinOp::Mul => a.checked_mul(b)?,
        BinOp::Div => c_div(a, b)?,
        BinOp::Mod => c_rem(a, b)?,
        BinOp::Lt => (a < b) as i64,
        BinOp::Le => (a <= b) as i64,
        BinOp::Gt => (a > b) as i64,
        BinOp::Ge => (a >= b) as i64,
        BinOp::Eq => (a == b) as i64,
        BinOp::Ne => (a != b) as i64,
        BinOp::And => (a != 0 && b != 0) as i64,
        BinOp::Or => (a != 0 || b != 0) as i64,
    })
}

pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Int(_) | Expr::Var(_) => e.clone(),
        Expr::Index { array, indices } => Expr::Index {
            array: array.clone(),
            indices: indices.iter().map(simplify).collect(),
        },
        Expr::Unary(op, inner) => {
            let inner = simplify(inner);
            match (op, &inner) {
                (UnOp::Neg, Expr::Int(n)) if *n != i64::MIN => Expr::Int(-n),
                (UnOp::Not, Expr::Int(n)) => Expr::Int((*n == 0) as i64),
                (UnOp::Neg, Expr::Unary(UnOp::Neg, x)) => (**x).clone(),
                _ => Expr::Unary(*op, Box::new(inner)),
            }
        }
        Expr::Binary(op, a, b) => {
            let a = simplify(a);
            let b = simplify(b);
            if let (Expr::Int(x), Expr::Int(y)) = (&a, &b) {
                if let Some(v) = fold_binop(*op, *x, *y) {
                    return Expr::Int(v);
                }
            }
            match (op, &a, &b) {
                (BinOp::Add, Expr::Int(0), _) => b,
                (BinOp::Add | BinOp::Sub, _, Expr::Int(0)) => a,
                (BinOp::Mul, Expr::Int(1), _) => b,
                (BinOp::Mul | BinOp::Div, _, Expr::Int(1)) => a,
                (BinOp::Mul, Expr::Int(0), _) | (BinOp::Mul, _, Expr::Int(0)) => Expr::Int(0),
                (BinOp::Mod, _, Expr::Int(1)) => Expr::Int(0),
                _ => Expr::bin(*op, a, b),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::parse_expr;
    use crate::dsl::printer::expr_to_string;

    fn s(src: &str) -> String {
        expr_to_string(&simplify(&parse_expr(src).unwrap()))
    }

    #[test]
    fn unit_laws_collapse_granularity_one() {
        assert_eq!(s("i * 1 * B + 0 * B + j"), "i * B + j");
        assert_eq!(s("(N - 2) / (1 * B)"), "(N - 2) / B");
        assert_eq!(s("(v1 * 1 + 0) * B1 + u1"), "v1 * B1 + u1");
    }

    #[test]
    fn folds_constants_with_c_semantics() {
        assert_eq!(s("7 / 2"), "3");
        assert_eq!(s("-7 / 2"), "-3");
        assert_eq!(s("-7 % 2"), "-1");
        assert_eq!(s("x / 0"), "x / 0");
    }
}
