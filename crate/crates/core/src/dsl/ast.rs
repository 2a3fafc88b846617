//! Syntax tree for the kernel language.

use std::fmt;

/// Source position of a statement, 1-based.
///
/// Spans never take part in structural equality: two trees that differ only
/// in where their statements were written compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }

    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Mul | BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(i64),
    Var(String),
    Index { array: String, indices: Vec<Expr> },
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// True when the expression reads no array element.
    pub fn is_pure(&self) -> bool {
        match self {
            Expr::Int(_) | Expr::Var(_) => true,
            Expr::Index { .. } => false,
            Expr::Unary(_, e) => e.is_pure(),
            Expr::Binary(_, a, b) => a.is_pure() && b.is_pure(),
        }
    }

    /// Calls `f` on every scalar variable read, in evaluation order.
    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Int(_) => {}
            Expr::Var(v) => f(v),
            Expr::Index { indices, .. } => indices.iter().for_each(|e| e.visit_vars(f)),
            Expr::Unary(_, e) => e.visit_vars(f),
            Expr::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    /// Calls `f` on every array element read, outermost first.
    pub fn visit_loads<'a>(&'a self, f: &mut impl FnMut(&'a str, &'a [Expr])) {
        match self {
            Expr::Int(_) | Expr::Var(_) => {}
            Expr::Index { array, indices } => {
                f(array, indices);
                indices.iter().for_each(|e| e.visit_loads(f));
            }
            Expr::Unary(_, e) => e.visit_loads(f),
            Expr::Binary(_, a, b) => {
                a.visit_loads(f);
                b.visit_loads(f);
            }
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        let mut found = false;
        self.visit_vars(&mut |v| found |= v == name);
        found
    }

    /// Replaces every read of a scalar with the expression `f` returns for it.
    pub fn substitute(&self, f: &impl Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Int(n) => Expr::Int(*n),
            Expr::Var(v) => f(v).unwrap_or_else(|| Expr::Var(v.clone())),
            Expr::Index { array, indices } => Expr::Index {
                array: array.clone(),
                indices: indices.iter().map(|e| e.substitute(f)).collect(),
            },
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.substitute(f))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.substitute(f)), Box::new(b.substitute(f)))
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Int(_) | Expr::Var(_) => 1,
            Expr::Index { indices, .. } => 1 + indices.iter().map(Expr::size).sum::<usize>(),
            Expr::Unary(_, e) => 1 + e.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LValue {
    Var(String),
    Index { array: String, indices: Vec<Expr> },
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(v) => v,
            LValue::Index { array, .. } => array,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
        }
    }

    pub fn bin_op(self) -> Option<BinOp> {
        match self {
            AssignOp::Set => None,
            AssignOp::Add => Some(BinOp::Add),
            AssignOp::Sub => Some(BinOp::Sub),
            AssignOp::Mul => Some(BinOp::Mul),
        }
    }
}

/// Explicit placement of a `meta_for` in the grid or thread half of the nest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LoopRole {
    Grid,
    Thread,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    /// `int x;`, `int x = e;`, `const int x = 2;`, `int a[N][M];`
    Decl {
        is_const: bool,
        name: String,
        dims: Vec<Expr>,
        init: Option<Expr>,
    },
    Assign {
        target: LValue,
        op: AssignOp,
        value: Expr,
    },
    /// Serial loop `for (int v = init; v < bound; ++v)`.
    For {
        var: String,
        init: Expr,
        bound: Expr,
        body: Box<Stmt>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    MetaFor {
        var: String,
        bound: Expr,
        role: Option<LoopRole>,
        body: Box<Stmt>,
    },
    MetaSchedule {
        cache: Vec<String>,
        body: Box<Stmt>,
    },
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    Block(Vec<Stmt>),
    Assert(Expr),
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            kind,
            span: Span::default(),
        }
    }

    pub fn block(stmts: Vec<Stmt>) -> Stmt {
        Stmt::new(StmtKind::Block(stmts))
    }

    /// Pre-order walk over this statement and all nested ones.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::For { body, .. }
            | StmtKind::While { body, .. }
            | StmtKind::MetaFor { body, .. }
            | StmtKind::MetaSchedule { body, .. } => body.walk(f),
            StmtKind::If { then, els, .. } => {
                then.walk(f);
                if let Some(e) = els {
                    e.walk(f);
                }
            }
            StmtKind::Block(stmts) => stmts.iter().for_each(|s| s.walk(f)),
            StmtKind::Decl { .. } | StmtKind::Assign { .. } | StmtKind::Assert(_) => {}
        }
    }

    /// Rebuilds the statement bottom-up, letting `f` rewrite each node after
    /// its children were rewritten.
    pub fn map(&self, f: &mut impl FnMut(Stmt) -> Stmt) -> Stmt {
        let kind = match &self.kind {
            StmtKind::For {
                var,
                init,
                bound,
                body,
            } => StmtKind::For {
                var: var.clone(),
                init: init.clone(),
                bound: bound.clone(),
                body: Box::new(body.map(f)),
            },
            StmtKind::While { cond, body } => StmtKind::While {
                cond: cond.clone(),
                body: Box::new(body.map(f)),
            },
            StmtKind::MetaFor {
                var,
                bound,
                role,
                body,
            } => StmtKind::MetaFor {
                var: var.clone(),
                bound: bound.clone(),
                role: *role,
                body: Box::new(body.map(f)),
            },
            StmtKind::MetaSchedule { cache, body } => StmtKind::MetaSchedule {
                cache: cache.clone(),
                body: Box::new(body.map(f)),
            },
            StmtKind::If { cond, then, els } => StmtKind::If {
                cond: cond.clone(),
                then: Box::new(then.map(f)),
                els: els.as_ref().map(|e| Box::new(e.map(f))),
            },
            StmtKind::Block(stmts) => StmtKind::Block(stmts.iter().map(|s| s.map(f)).collect()),
            k => k.clone(),
        };
        f(Stmt {
            kind,
            span: self.span,
        })
    }

    /// Applies `f` to every expression held directly by this statement tree
    /// (including lvalue subscripts and loop bounds).
    pub fn map_exprs(&self, f: &impl Fn(&Expr) -> Expr) -> Stmt {
        self.map(&mut |s| {
            let kind = match s.kind {
                StmtKind::Decl {
                    is_const,
                    name,
                    dims,
                    init,
                } => StmtKind::Decl {
                    is_const,
                    name,
                    dims: dims.iter().map(f).collect(),
                    init: init.as_ref().map(f),
                },
                StmtKind::Assign { target, op, value } => StmtKind::Assign {
                    target: match target {
                        LValue::Var(v) => LValue::Var(v),
                        LValue::Index { array, indices } => LValue::Index {
                            array,
                            indices: indices.iter().map(f).collect(),
                        },
                    },
                    op,
                    value: f(&value),
                },
                StmtKind::For {
                    var,
                    init,
                    bound,
                    body,
                } => StmtKind::For {
                    var,
                    init: f(&init),
                    bound: f(&bound),
                    body,
                },
                StmtKind::While { cond, body } => StmtKind::While {
                    cond: f(&cond),
                    body,
                },
                StmtKind::MetaFor {
                    var,
                    bound,
                    role,
                    body,
                } => StmtKind::MetaFor {
                    var,
                    bound: f(&bound),
                    role,
                    body,
                },
                StmtKind::If { cond, then, els } => StmtKind::If {
                    cond: f(&cond),
                    then,
                    els,
                },
                StmtKind::Assert(e) => StmtKind::Assert(f(&e)),
                k @ (StmtKind::Block(_) | StmtKind::MetaSchedule { .. }) => k,
            };
            Stmt { kind, span: s.span }
        })
    }
}

/// A parsed compile unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub items: Vec<Stmt>,
}

/// One `meta_for` of the parallel nest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaLoop {
    pub var: String,
    pub bound: Expr,
    pub role: LoopRole,
}

/// The parallel nest of the `meta_schedule` block: its `meta_for` prefix and
/// the per-thread body underneath it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nest {
    pub cache: Vec<String>,
    pub loops: Vec<MetaLoop>,
    pub body: Stmt,
}

impl Nest {
    pub fn grid_loops(&self) -> impl Iterator<Item = &MetaLoop> {
        self.loops.iter().filter(|l| l.role == LoopRole::Grid)
    }

    pub fn thread_loops(&self) -> impl Iterator<Item = &MetaLoop> {
        self.loops.iter().filter(|l| l.role == LoopRole::Thread)
    }
}
