//! Recursive-descent parser for the kernel language.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::DslError;

pub fn parse(src: &str) -> Result<Program, DslError> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        schedule_seen: None,
    };
    let mut items = Vec::new();
    while !p.at_eof() {
        items.extend(p.stmt_or_decls()?);
    }
    if p.schedule_seen.is_none() {
        return Err(DslError::MissingMetaSchedule);
    }
    Ok(Program { items })
}

/// Parses a standalone expression (used for constraint text and tests).
pub fn parse_expr(src: &str) -> Result<Expr, DslError> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        schedule_seen: None,
    };
    let e = p.expr()?;
    if !p.at_eof() {
        return Err(DslError::syntax(p.span(), "trailing input after expression"));
    }
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    schedule_seen: Option<Span>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), DslError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), DslError> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn unexpected(&self, wanted: &str) -> DslError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        };
        DslError::syntax(self.span(), format!("expected {wanted}, found {found}"))
    }

    /// A declaration may introduce several names; everything else is one statement.
    fn stmt_or_decls(&mut self) -> Result<Vec<Stmt>, DslError> {
        if self.is_kw("int") || self.is_kw("const") {
            self.decls()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn decls(&mut self) -> Result<Vec<Stmt>, DslError> {
        let is_const = if self.is_kw("const") {
            self.advance();
            true
        } else {
            false
        };
        self.expect_kw("int")?;
        let mut out = Vec::new();
        loop {
            let span = self.span();
            let name = self.ident()?;
            let mut dims = Vec::new();
            while self.eat_punct("[") {
                dims.push(self.expr()?);
                self.expect_punct("]")?;
            }
            let init = if self.eat_punct("=") {
                Some(self.expr()?)
            } else {
                None
            };
            if is_const && (init.is_none() || !dims.is_empty()) {
                return Err(DslError::syntax(
                    span,
                    "a const declaration needs a scalar initializer",
                ));
            }
            out.push(Stmt {
                kind: StmtKind::Decl {
                    is_const,
                    name,
                    dims,
                    init,
                },
                span,
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, DslError> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Punct("{") => {
                self.advance();
                let mut stmts = Vec::new();
                while !self.is_punct("}") {
                    if self.at_eof() {
                        return Err(self.unexpected("`}`"));
                    }
                    stmts.extend(self.stmt_or_decls()?);
                }
                self.advance();
                StmtKind::Block(stmts)
            }
            Tok::Punct("@") => return self.annotated_meta_for(),
            Tok::Ident(kw) => match kw.as_str() {
                "meta_schedule" => return self.meta_schedule(),
                "meta_for" => return self.meta_for(None, span),
                "for" => return self.for_loop(),
                "while" => {
                    self.advance();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let body = Box::new(self.stmt()?);
                    StmtKind::While { cond, body }
                }
                "if" => {
                    self.advance();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let then = Box::new(self.stmt()?);
                    let els = if self.is_kw("else") {
                        self.advance();
                        Some(Box::new(self.stmt()?))
                    } else {
                        None
                    };
                    StmtKind::If { cond, then, els }
                }
                "assert" => {
                    self.advance();
                    self.expect_punct("(")?;
                    let e = self.expr()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    StmtKind::Assert(e)
                }
                "int" | "const" => {
                    return Err(DslError::syntax(
                        span,
                        "declaration not allowed as a loop or branch body; wrap it in `{ }`",
                    ))
                }
                _ => {
                    let s = self.simple_assign()?;
                    self.expect_punct(";")?;
                    s
                }
            },
            _ => return Err(self.unexpected("statement")),
        };
        Ok(Stmt { kind, span })
    }

    /// `x = e`, `a[i][j] += e`, `x++`, `x--`, `++x`, `--x`.
    fn simple_assign(&mut self) -> Result<StmtKind, DslError> {
        if self.is_punct("++") || self.is_punct("--") {
            let op = if self.eat_punct("++") {
                AssignOp::Add
            } else {
                self.advance();
                AssignOp::Sub
            };
            let name = self.ident()?;
            return Ok(StmtKind::Assign {
                target: LValue::Var(name),
                op,
                value: Expr::Int(1),
            });
        }
        let name = self.ident()?;
        let mut indices = Vec::new();
        while self.eat_punct("[") {
            indices.push(self.expr()?);
            self.expect_punct("]")?;
        }
        let target = if indices.is_empty() {
            LValue::Var(name)
        } else {
            LValue::Index {
                array: name,
                indices,
            }
        };
        if self.is_punct("++") || self.is_punct("--") {
            let op = if self.eat_punct("++") {
                AssignOp::Add
            } else {
                self.advance();
                AssignOp::Sub
            };
            return Ok(StmtKind::Assign {
                target,
                op,
                value: Expr::Int(1),
            });
        }
        let op = match self.peek() {
            Tok::Punct("=") => AssignOp::Set,
            Tok::Punct("+=") => AssignOp::Add,
            Tok::Punct("-=") => AssignOp::Sub,
            Tok::Punct("*=") => AssignOp::Mul,
            _ => return Err(self.unexpected("assignment operator")),
        };
        self.advance();
        let value = self.expr()?;
        Ok(StmtKind::Assign { target, op, value })
    }

    fn meta_schedule(&mut self) -> Result<Stmt, DslError> {
        let span = self.span();
        self.advance();
        if let Some(first) = self.schedule_seen {
            return Err(DslError::MultipleMetaSchedule {
                line: span.line,
                col: span.col,
                first_line: first.line,
            });
        }
        self.schedule_seen = Some(span);
        let mut cache = Vec::new();
        if self.is_kw("cache") {
            self.advance();
            self.expect_punct("(")?;
            if !self.is_punct(")") {
                loop {
                    cache.push(self.ident()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
        }
        if !self.is_punct("{") {
            return Err(self.unexpected("`{` after meta_schedule"));
        }
        let body = Box::new(self.stmt()?);
        Ok(Stmt {
            kind: StmtKind::MetaSchedule { cache, body },
            span,
        })
    }

    fn annotated_meta_for(&mut self) -> Result<Stmt, DslError> {
        let span = self.span();
        self.advance();
        let role = match self.ident()?.as_str() {
            "grid" => LoopRole::Grid,
            "thread" => LoopRole::Thread,
            other => {
                return Err(DslError::syntax(
                    span,
                    format!("unknown annotation `@{other}`; expected @grid or @thread"),
                ))
            }
        };
        if !self.is_kw("meta_for") {
            return Err(self.unexpected("`meta_for` after annotation"));
        }
        self.meta_for(Some(role), span)
    }

    /// `meta_for (int v = 0; v < bound; v++) stmt`, nothing else accepted.
    fn meta_for(&mut self, role: Option<LoopRole>, span: Span) -> Result<Stmt, DslError> {
        self.advance();
        let malformed = |p: &Parser, msg: &str| DslError::MalformedMetaFor {
            line: p.span().line,
            col: p.span().col,
            msg: msg.to_string(),
        };
        self.expect_punct("(")
            .map_err(|_| malformed(self, "expected `(`"))?;
        self.expect_kw("int")
            .map_err(|_| malformed(self, "loop index must be declared `int`"))?;
        let var = self
            .ident()
            .map_err(|_| malformed(self, "expected loop index"))?;
        self.expect_punct("=")
            .map_err(|_| malformed(self, "expected `= 0`"))?;
        if !matches!(self.peek(), Tok::Int(0)) {
            return Err(malformed(self, "loop index must start at 0"));
        }
        self.advance();
        self.expect_punct(";")
            .map_err(|_| malformed(self, "expected `;`"))?;
        let v2 = self
            .ident()
            .map_err(|_| malformed(self, "expected loop index in condition"))?;
        if v2 != var {
            return Err(malformed(self, "condition must test the loop index"));
        }
        self.expect_punct("<")
            .map_err(|_| malformed(self, "condition must be `index < bound`"))?;
        let bound = self.additive()?;
        self.expect_punct(";")
            .map_err(|_| malformed(self, "expected `;`"))?;
        self.increment(&var)
            .map_err(|_| malformed(self, "increment must be `index++` or `++index`"))?;
        self.expect_punct(")")
            .map_err(|_| malformed(self, "expected `)`"))?;
        let body = Box::new(self.stmt()?);
        Ok(Stmt {
            kind: StmtKind::MetaFor {
                var,
                bound,
                role,
                body,
            },
            span,
        })
    }

    fn increment(&mut self, var: &str) -> Result<(), DslError> {
        if self.eat_punct("++") {
            let v = self.ident()?;
            if v == var {
                return Ok(());
            }
        } else {
            let v = self.ident()?;
            if v == var && self.eat_punct("++") {
                return Ok(());
            }
        }
        Err(DslError::syntax(self.span(), "bad increment"))
    }

    fn for_loop(&mut self) -> Result<Stmt, DslError> {
        let span = self.span();
        self.advance();
        self.expect_punct("(")?;
        self.expect_kw("int")?;
        let var = self.ident()?;
        self.expect_punct("=")?;
        let init = self.expr()?;
        self.expect_punct(";")?;
        let v2 = self.ident()?;
        if v2 != var {
            return Err(DslError::syntax(span, "for condition must test the loop index"));
        }
        self.expect_punct("<")?;
        let bound = self.additive()?;
        self.expect_punct(";")?;
        if self.increment(&var).is_err() {
            return Err(DslError::syntax(span, "for increment must be `++index` or `index++`"));
        }
        self.expect_punct(")")?;
        let body = Box::new(self.stmt()?);
        Ok(Stmt {
            kind: StmtKind::For {
                var,
                init,
                bound,
                body,
            },
            span,
        })
    }

    pub fn expr(&mut self) -> Result<Expr, DslError> {
        self.binary(1)
    }

    fn additive(&mut self) -> Result<Expr, DslError> {
        self.binary(5)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        while let Tok::Punct(p) = self.peek() {
            let op = match binop_of(p) {
                Some(op) if op.precedence() >= min_prec => op,
                _ => break,
            };
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.eat_punct("-") {
            let e = self.unary()?;
            return Ok(match e {
                Expr::Int(n) => Expr::Int(-n),
                e => Expr::Unary(UnOp::Neg, Box::new(e)),
            });
        }
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::Int(n))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if matches!(self.peek_at(0), Tok::Punct("[")) {
                    let mut indices = Vec::new();
                    while self.eat_punct("[") {
                        indices.push(self.expr()?);
                        self.expect_punct("]")?;
                    }
                    if indices.len() > 2 {
                        return Err(DslError::syntax(
                            self.span(),
                            "arrays have at most two subscripts",
                        ));
                    }
                    Ok(Expr::Index {
                        array: name,
                        indices,
                    })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

fn binop_of(p: &str) -> Option<BinOp> {
    Some(match p {
        "+" => BinOp::Add,
        "-" => BinOp::Sub,
        "*" => BinOp::Mul,
        "/" => BinOp::Div,
        "%" => BinOp::Mod,
        "<" => BinOp::Lt,
        "<=" => BinOp::Le,
        ">" => BinOp::Gt,
        ">=" => BinOp::Ge,
        "==" => BinOp::Eq,
        "!=" => BinOp::Ne,
        "&&" => BinOp::And,
        "||" => BinOp::Or,
        _ => return None,
    })
}

fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "int"
            | "const"
            | "for"
            | "while"
            | "if"
            | "else"
            | "meta_for"
            | "meta_schedule"
            | "cache"
            | "assert"
    )
}
