//! The kernel language: parsing, printing and parameter classification.
//!
//! A compile unit holds scalar and array declarations, optional serial
//! context code, and exactly one `meta_schedule` block whose `meta_for`
//! prefix forms the parallel nest.

pub mod ast;
mod classify;
mod lexer;
pub mod parser;
pub mod printer;
pub mod simplify;

use thiserror::Error;

pub use ast::*;
pub use classify::{classify_parameters, ArrayDecl, ParamTable};
pub use parser::{parse, parse_expr};
pub use simplify::{fold_binop, simplify};
pub use printer::{expr_to_string, program_to_string, stmt_to_string};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("syntax error at {line}:{col}: second meta_schedule block (first one at line {first_line}); exactly one is allowed")]
    MultipleMetaSchedule { line: u32, col: u32, first_line: u32 },
    #[error("syntax error: no meta_schedule block")]
    MissingMetaSchedule,
    #[error("syntax error at {line}:{col}: malformed meta_for header: {msg}")]
    MalformedMetaFor { line: u32, col: u32, msg: String },
    #[error("invalid parallel nest: {0}")]
    Nest(String),
    #[error("cannot classify `{name}`: {msg}")]
    Classification { name: String, msg: String },
}

impl DslError {
    pub(crate) fn syntax(span: Span, msg: impl Into<String>) -> DslError {
        DslError::Syntax {
            line: span.line,
            col: span.col,
            msg: msg.into(),
        }
    }
}

impl Program {
    /// The `meta_schedule` statement, wherever it sits in the context code.
    pub fn schedule(&self) -> &Stmt {
        let mut found = None;
        for item in &self.items {
            item.walk(&mut |s| {
                if found.is_none() && matches!(s.kind, StmtKind::MetaSchedule { .. }) {
                    found = Some(s);
                }
            });
        }
        found.expect("parsed programs always hold a meta_schedule")
    }

    pub fn cache_set(&self) -> &[String] {
        match &self.schedule().kind {
            StmtKind::MetaSchedule { cache, .. } => cache,
            _ => unreachable!(),
        }
    }

    /// Returns a copy with the `meta_schedule` statement rewritten by `f`.
    pub fn map_schedule(&self, f: impl Fn(&[String], &Stmt) -> (Vec<String>, Stmt)) -> Program {
        let items = self
            .items
            .iter()
            .map(|item| {
                item.map(&mut |s| match &s.kind {
                    StmtKind::MetaSchedule { cache, body } => {
                        let (cache, body) = f(cache, body);
                        Stmt {
                            kind: StmtKind::MetaSchedule {
                                cache,
                                body: Box::new(body),
                            },
                            span: s.span,
                        }
                    }
                    _ => s,
                })
            })
            .collect();
        Program { items }
    }

    /// Top-level declarations in source order.
    pub fn top_decls(&self) -> impl Iterator<Item = &Stmt> {
        self.items
            .iter()
            .filter(|s| matches!(s.kind, StmtKind::Decl { .. }))
    }

    /// Splits the `meta_schedule` body into its `meta_for` prefix and the
    /// per-thread body.
    ///
    /// Unannotated loops are split by position: with `n` loops the first
    /// `ceil(n / 2)` are grid loops and the rest thread loops.
    pub fn nest(&self) -> Result<Nest, DslError> {
        let (cache, body) = match &self.schedule().kind {
            StmtKind::MetaSchedule { cache, body } => (cache.clone(), body.as_ref()),
            _ => unreachable!(),
        };
        let mut raw: Vec<(String, Expr, Option<LoopRole>)> = Vec::new();
        let mut cur = body;
        loop {
            match &cur.kind {
                StmtKind::MetaFor {
                    var,
                    bound,
                    role,
                    body,
                } => {
                    raw.push((var.clone(), bound.clone(), *role));
                    cur = body;
                }
                StmtKind::Block(stmts)
                    if stmts.len() == 1 && matches!(stmts[0].kind, StmtKind::MetaFor { .. }) =>
                {
                    cur = &stmts[0];
                }
                _ => break,
            }
        }
        if raw.is_empty() {
            return Err(DslError::Nest(
                "meta_schedule body must start with a meta_for loop".into(),
            ));
        }
        if raw.len() > 4 {
            return Err(DslError::Nest(format!(
                "meta_for nest has depth {}; at most 4 is supported",
                raw.len()
            )));
        }
        let mut stray = None;
        cur.walk(&mut |s| {
            if let StmtKind::MetaFor { var, .. } = &s.kind {
                stray.get_or_insert_with(|| var.clone());
            }
        });
        if let Some(v) = stray {
            return Err(DslError::Nest(format!(
                "meta_for `{v}` is not part of the perfect loop-nest prefix"
            )));
        }
        let n_grid_default = raw.len().div_ceil(2);
        let loops: Vec<MetaLoop> = raw
            .into_iter()
            .enumerate()
            .map(|(i, (var, bound, role))| MetaLoop {
                var,
                bound,
                role: role.unwrap_or(if i < n_grid_default {
                    LoopRole::Grid
                } else {
                    LoopRole::Thread
                }),
            })
            .collect();
        if loops
            .windows(2)
            .any(|w| w[0].role == LoopRole::Thread && w[1].role == LoopRole::Grid)
        {
            return Err(DslError::Nest(
                "grid meta_for loops must enclose all thread meta_for loops".into(),
            ));
        }
        Ok(Nest {
            cache,
            loops,
            body: cur.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_nest_has_one_grid_loop() {
        let p = parse("int n; int a[n]; int b[n]; meta_schedule { meta_for (int i = 0; i < n; i++) a[i] = b[i]; }").unwrap();
        let nest = p.nest().unwrap();
        assert_eq!(nest.grid_loops().count(), 1);
        assert_eq!(nest.thread_loops().count(), 0);
    }

    #[test]
    fn annotations_override_split() {
        let p = parse(
            "int n; int a[n]; meta_schedule { @grid meta_for (int i = 0; i < n; i++) @grid meta_for (int j = 0; j < n; j++) a[i] = j; }",
        )
        .unwrap();
        assert_eq!(p.nest().unwrap().grid_loops().count(), 2);
        let p = parse(
            "int n; int a[n]; meta_schedule { @thread meta_for (int i = 0; i < n; i++) @grid meta_for (int j = 0; j < n; j++) a[i] = j; }",
        )
        .unwrap();
        assert!(matches!(p.nest(), Err(DslError::Nest(_))));
    }

    #[test]
    fn two_schedules_rejected() {
        let err = parse("int n; meta_schedule { meta_for (int i = 0; i < n; i++) {} } meta_schedule { meta_for (int i = 0; i < n; i++) {} }").unwrap_err();
        assert!(matches!(err, DslError::MultipleMetaSchedule { line: 1, .. }));
    }

    #[test]
    fn malformed_meta_for_header() {
        let err = parse("int n; meta_schedule { meta_for (int i = 1; i < n; i++) {} }").unwrap_err();
        assert!(matches!(err, DslError::MalformedMetaFor { .. }), "{err}");
        let err = parse("int n; meta_schedule { meta_for (int i = 0; i <= n; i++) {} }").unwrap_err();
        assert!(matches!(err, DslError::MalformedMetaFor { .. }), "{err}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse("int n;\nmeta_schedule {\n  meta_for (int i = 0; i < n; i++)\n    x = ;\n}").unwrap_err();
        match err {
            DslError::Syntax { line, col, .. } => assert_eq!((line, col), (4, 9)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn stray_meta_for_rejected() {
        let p = parse("int n; int a[n]; meta_schedule { meta_for (int i = 0; i < n; i++) { a[i] = 0; meta_for (int j = 0; j < n; j++) a[j] = 1; } }").unwrap();
        assert!(matches!(p.nest(), Err(DslError::Nest(_))));
    }
}
