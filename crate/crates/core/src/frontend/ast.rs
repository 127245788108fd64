//! Typed syntax tree for MiniC.
//!
//! Every node carries a [`Meta`] with a stable node id and source location.
//! Equality on syntax nodes is structural: metadata is ignored, so two trees
//! compare equal when they have the same shape, names, types and literals.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::IntType;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Unique identity of one variable declaration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub u32);

#[derive(Debug, Clone, Copy, Default)]
pub struct Meta {
    pub id: NodeId,
    pub loc: Loc,
}

impl PartialEq for Meta {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Meta {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarRef {
    pub name: String,
    pub id: VarId,
    pub ty: IntType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub meta: Meta,
    pub name: String,
    pub id: VarId,
    pub ty: IntType,
    pub init: Option<Expr>,
}

impl VarDecl {
    pub fn var_ref(&self) -> VarRef {
        VarRef { name: self.name.clone(), id: self.id, ty: self.ty }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
    BitNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitOr,
    BitXor,
    LogAnd,
    LogOr,
}

impl BinOp {
    pub const ALL: [BinOp; 18] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::Shl,
        BinOp::Shr,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::BitAnd,
        BinOp::BitOr,
        BinOp::BitXor,
        BinOp::LogAnd,
        BinOp::LogOr,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::LogAnd => "&&",
            BinOp::LogOr => "||",
        }
    }

    /// C precedence level; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::LogOr => 1,
            BinOp::LogAnd => 2,
            BinOp::BitOr => 3,
            BinOp::BitXor => 4,
            BinOp::BitAnd => 5,
            BinOp::Eq | BinOp::Ne => 6,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 7,
            BinOp::Shl | BinOp::Shr => 8,
            BinOp::Add | BinOp::Sub => 9,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 10,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::LogAnd | BinOp::LogOr)
    }

    pub fn is_shift(self) -> bool {
        matches!(self, BinOp::Shl | BinOp::Shr)
    }

    /// Operators allowed in compound assignment (`+=`, `<<=`, ...).
    pub fn compound_assignable(self) -> bool {
        !self.is_comparison() && !self.is_logical()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub meta: Meta,
    /// Resolved result type.
    pub ty: IntType,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    /// Literal bits, already masked to `ty`.
    Lit(u64),
    Var(VarRef),
    Unary(UnOp, Box<Expr>),
    /// `op_ty` is the type both operands are converted to before the operation.
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, op_ty: IntType },
    Cast(Box<Expr>),
    /// Call to a nondet intrinsic; the name is kept for unparsing.
    Nondet(String),
    /// Call to a user function; only allowed as a whole right-hand side.
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn lit(meta: Meta, ty: IntType, value: u64) -> Expr {
        Expr { meta, ty, kind: ExprKind::Lit(value & ty.mask()) }
    }

    pub fn var(meta: Meta, v: VarRef) -> Expr {
        Expr { meta, ty: v.ty, kind: ExprKind::Var(v) }
    }

    /// Visit this expression and every subexpression in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Lit(_) | ExprKind::Var(_) | ExprKind::Nondet(_) => {}
            ExprKind::Unary(_, e) | ExprKind::Cast(e) => e.walk(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
        }
    }

    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        f(self);
        match &mut self.kind {
            ExprKind::Lit(_) | ExprKind::Var(_) | ExprKind::Nondet(_) => {}
            ExprKind::Unary(_, e) | ExprKind::Cast(e) => e.walk_mut(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk_mut(f);
                rhs.walk_mut(f);
            }
            ExprKind::Call(_, args) => args.iter_mut().for_each(|a| a.walk_mut(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub meta: Meta,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Decl(VarDecl),
    /// `target = value` or, with `op`, `target op= value`.
    Assign { target: VarRef, op: Option<BinOp>, value: Expr },
    /// Expression evaluated for its effect (a call or a discarded nondet).
    Expr(Expr),
    If { cond: Expr, then: Box<Stmt>, els: Option<Box<Stmt>> },
    While { cond: Expr, body: Box<Stmt> },
    DoWhile { body: Box<Stmt>, cond: Expr },
    For { init: Vec<Stmt>, cond: Option<Expr>, update: Vec<Stmt>, body: Box<Stmt> },
    Break,
    Continue,
    Return(Option<Expr>),
    Block(Vec<Stmt>),
    Assert(Expr),
    Assume(Expr),
    /// Marker with no semantics (`printf` calls, disabled assertions).
    Noop(String),
}

impl Stmt {
    pub fn new(meta: Meta, kind: StmtKind) -> Stmt {
        Stmt { meta, kind }
    }

    pub fn is_loop(&self) -> bool {
        matches!(self.kind, StmtKind::While { .. } | StmtKind::DoWhile { .. } | StmtKind::For { .. })
    }

    /// Visit this statement and all nested statements in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If { then, els, .. } => {
                then.walk(f);
                if let Some(e) = els {
                    e.walk(f);
                }
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => body.walk(f),
            StmtKind::For { init, update, body, .. } => {
                init.iter().for_each(|s| s.walk(f));
                update.iter().for_each(|s| s.walk(f));
                body.walk(f);
            }
            StmtKind::Block(stmts) => stmts.iter().for_each(|s| s.walk(f)),
            _ => {}
        }
    }

    /// Visit every expression directly owned by this statement (not nested statements).
    pub fn own_exprs<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        match &self.kind {
            StmtKind::Decl(d) => {
                if let Some(e) = &d.init {
                    f(e)
                }
            }
            StmtKind::Assign { value, .. } => f(value),
            StmtKind::Expr(e) | StmtKind::Assert(e) | StmtKind::Assume(e) => f(e),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } | StmtKind::DoWhile { cond, .. } => f(cond),
            StmtKind::For { cond: Some(c), .. } => f(c),
            StmtKind::Return(Some(e)) => f(e),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub meta: Meta,
    pub name: String,
    /// `None` for `void`.
    pub ret: Option<IntType>,
    pub params: Vec<VarDecl>,
    pub body: Vec<Stmt>,
    /// Set by the support check on every non-entry function.
    pub inline: bool,
}

impl Function {
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        self.body.iter().for_each(|s| s.walk(f));
    }
}

/// Source of fresh node and variable ids for transforms.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdGen {
    pub next_node: u32,
    pub next_var: u32,
}

impl IdGen {
    pub fn node(&mut self) -> NodeId {
        self.next_node += 1;
        NodeId(self.next_node)
    }

    pub fn var(&mut self) -> VarId {
        self.next_var += 1;
        VarId(self.next_var)
    }

    pub fn meta(&mut self, loc: Loc) -> Meta {
        Meta { id: self.node(), loc }
    }
}

impl PartialEq for IdGen {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for IdGen {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub globals: Vec<VarDecl>,
    pub functions: Vec<Function>,
    pub entry: String,
    pub ids: IdGen,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn entry_function(&self) -> &Function {
        self.function(&self.entry).expect("validated program has an entry function")
    }

    /// All statements of all functions in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Function, &'a Stmt)) {
        for func in &self.functions {
            func.walk(&mut |s| f(func, s));
        }
    }

    /// Loop statements in program order, paired with their enclosing function.
    pub fn loops(&self) -> Vec<(&Function, &Stmt)> {
        let mut out = Vec::new();
        self.walk(&mut |func, s| {
            if s.is_loop() {
                out.push((func, s));
            }
        });
        out
    }

    pub fn find_stmt(&self, id: NodeId) -> Option<(&Function, &Stmt)> {
        let mut found = None;
        self.walk(&mut |func, s| {
            if s.meta.id == id && found.is_none() {
                found = Some((func, s));
            }
        });
        found
    }
}
