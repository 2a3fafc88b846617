//! Canonical source rendering. Re-parsing the output yields the same tree.

use std::fmt::Write;

use super::ast::*;

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Var(v) => out.push_str(v),
        Expr::Index { array, indices } => {
            out.push_str(array);
            for ix in indices {
                out.push('[');
                write_expr(out, ix, 0);
                out.push(']');
            }
        }
        Expr::Unary(op, inner) => {
            out.push_str(match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            });
            match **inner {
                Expr::Binary(..) | Expr::Unary(..) => {
                    out.push('(');
                    write_expr(out, inner, 0);
                    out.push(')');
                }
                Expr::Int(n) if n < 0 => {
                    let _ = write!(out, "({n})");
                }
                _ => write_expr(out, inner, 7),
            }
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            let paren = p < min_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, a, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, p + 1);
            if paren {
                out.push(')');
            }
        }
    }
}

pub fn program_to_string(p: &Program) -> String {
    let mut out = String::new();
    for s in &p.items {
        write_stmt(&mut out, s, 0);
    }
    out
}

pub fn stmt_to_string(s: &Stmt, indent: usize) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s, indent);
    out
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Writes `body` after a header that is already on the current line.
fn write_body(out: &mut String, body: &Stmt, indent: usize) {
    if let StmtKind::Block(stmts) = &body.kind {
        out.push_str(" {\n");
        for s in stmts {
            write_stmt(out, s, indent + 1);
        }
        pad(out, indent);
        out.push_str("}\n");
    } else {
        out.push('\n');
        write_stmt(out, body, indent + 1);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, indent: usize) {
    pad(out, indent);
    match &s.kind {
        StmtKind::Decl {
            is_const,
            name,
            dims,
            init,
        } => {
            if *is_const {
                out.push_str("const ");
            }
            let _ = write!(out, "int {name}");
            for d in dims {
                let _ = write!(out, "[{}]", expr_to_string(d));
            }
            if let Some(e) = init {
                let _ = write!(out, " = {}", expr_to_string(e));
            }
            out.push_str(";\n");
        }
        StmtKind::Assign { target, op, value } => {
            match target {
                LValue::Var(v) => out.push_str(v),
                LValue::Index { array, indices } => {
                    out.push_str(array);
                    for ix in indices {
                        let _ = write!(out, "[{}]", expr_to_string(ix));
                    }
                }
            }
            let _ = writeln!(out, " {} {};", op.symbol(), expr_to_string(value));
        }
        StmtKind::For {
            var,
            init,
            bound,
            body,
        } => {
            let _ = write!(
                out,
                "for (int {var} = {}; {var} < {}; ++{var})",
                expr_to_string(init),
                expr_to_string(bound)
            );
            write_body(out, body, indent);
        }
        StmtKind::While { cond, body } => {
            let _ = write!(out, "while ({})", expr_to_string(cond));
            write_body(out, body, indent);
        }
        StmtKind::MetaFor {
            var,
            bound,
            role,
            body,
        } => {
            match role {
                Some(LoopRole::Grid) => out.push_str("@grid "),
                Some(LoopRole::Thread) => out.push_str("@thread "),
                None => {}
            }
            let _ = write!(
                out,
                "meta_for (int {var} = 0; {var} < {}; {var}++)",
                expr_to_string(bound)
            );
            write_body(out, body, indent);
        }
        StmtKind::MetaSchedule { cache, body } => {
            out.push_str("meta_schedule");
            if !cache.is_empty() {
                let _ = write!(out, " cache({})", cache.join(", "));
            }
            write_body(out, body, indent);
        }
        StmtKind::If { cond, then, els } => {
            let _ = write!(out, "if ({})", expr_to_string(cond));
            write_body(out, then, indent);
            if let Some(e) = els {
                pad(out, indent);
                out.push_str("else");
                write_body(out, e, indent);
            }
        }
        StmtKind::Block(stmts) => {
            out.push_str("{\n");
            for st in stmts {
                write_stmt(out, st, indent + 1);
            }
            pad(out, indent);
            out.push_str("}\n");
        }
        StmtKind::Assert(e) => {
            let _ = writeln!(out, "assert({});", expr_to_string(e));
        }
    }
}
