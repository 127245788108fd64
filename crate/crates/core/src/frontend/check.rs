//! Name resolution, typing, and the supported-subset checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::*;
use super::types::IntType;
use super::Diagnostic;

struct Scope {
    vars: HashMap<String, VarRef>,
}

struct Resolver<'a> {
    scopes: Vec<Scope>,
    functions: &'a BTreeMap<String, (Option<IntType>, Vec<IntType>)>,
    ids: &'a mut IdGen,
    diags: Vec<Diagnostic>,
    loop_depth: usize,
    ret: Option<IntType>,
}

/// Resolve names and types in place.
pub(super) fn resolve(p: &mut Program) -> Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut signatures = BTreeMap::new();
    for f in &p.functions {
        if signatures.insert(f.name.clone(), (f.ret, f.params.iter().map(|d| d.ty).collect())).is_some() {
            diags.push(Diagnostic::error(f.meta.loc, format!("redefinition of function `{}`", f.name)));
        }
    }
    let mut ids = p.ids;
    let mut r = Resolver {
        scopes: vec![Scope { vars: HashMap::new() }],
        functions: &signatures,
        ids: &mut ids,
        diags,
        loop_depth: 0,
        ret: None,
    };
    for g in &mut p.globals {
        if let Some(init) = &mut g.init {
            r.expr(init, false);
            if !is_constant(init) {
                r.diags.push(Diagnostic::error(init.meta.loc, "global initializer must be a constant expression"));
            }
        }
        r.declare(g);
    }
    for f in &mut p.functions {
        r.scopes.push(Scope { vars: HashMap::new() });
        for param in &mut f.params {
            r.declare(param);
        }
        r.ret = f.ret;
        r.loop_depth = 0;
        r.stmts(&mut f.body);
        r.scopes.pop();
    }
    let mut diags = r.diags;
    p.ids = ids;
    match p.function(&p.entry) {
        None => diags.push(Diagnostic::error(Loc { line: 1, col: 1 }, "no `main` function")),
        Some(m) if !m.params.is_empty() => diags.push(Diagnostic::error(m.meta.loc, "`main` must take no parameters")),
        _ => {}
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

fn is_constant(e: &Expr) -> bool {
    let mut ok = true;
    e.walk(&mut |x| {
        if matches!(x.kind, ExprKind::Var(_) | ExprKind::Nondet(_) | ExprKind::Call(..)) {
            ok = false;
        }
    });
    ok
}

impl Resolver<'_> {
    fn declare(&mut self, d: &mut VarDecl) {
        d.id = self.ids.var();
        let scope = self.scopes.last_mut().expect("scope stack is never empty");
        if scope.vars.contains_key(&d.name) {
            self.diags.push(Diagnostic::error(d.meta.loc, format!("redeclaration of `{}`", d.name)));
        }
        scope.vars.insert(d.name.clone(), d.var_ref());
    }

    fn lookup(&self, name: &str) -> Option<VarRef> {
        self.scopes.iter().rev().find_map(|s| s.vars.get(name).cloned())
    }

    fn resolve_ref(&mut self, r: &mut VarRef, loc: Loc) {
        match self.lookup(&r.name) {
            Some(found) => *r = found,
            None => self.diags.push(Diagnostic::error(loc, format!("use of undeclared variable `{}`", r.name))),
        }
    }

    fn stmts(&mut self, stmts: &mut [Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn scoped(&mut self, f: impl FnOnce(&mut Self)) {
        self.scopes.push(Scope { vars: HashMap::new() });
        f(self);
        self.scopes.pop();
    }

    fn body(&mut self, s: &mut Stmt) {
        self.scoped(|r| r.stmt(s));
    }

    fn stmt(&mut self, s: &mut Stmt) {
        let loc = s.meta.loc;
        match &mut s.kind {
            StmtKind::Decl(d) => {
                if let Some(init) = &mut d.init {
                    self.expr(init, true);
                }
                self.declare(d);
            }
            StmtKind::Assign { target, op, value } => {
                self.expr(value, op.is_none());
                self.resolve_ref(target, loc);
            }
            StmtKind::Expr(e) => self.expr(e, true),
            StmtKind::If { cond, then, els } => {
                self.expr(cond, false);
                self.body(then);
                if let Some(e) = els {
                    self.body(e);
                }
            }
            StmtKind::While { cond, body } | StmtKind::DoWhile { body, cond } => {
                self.expr(cond, false);
                self.loop_depth += 1;
                self.body(body);
                self.loop_depth -= 1;
            }
            StmtKind::For { init, cond, update, body } => {
                self.scoped(|r| {
                    r.stmts(init);
                    if let Some(c) = cond {
                        r.expr(c, false);
                    }
                    r.stmts(update);
                    r.loop_depth += 1;
                    r.body(body);
                    r.loop_depth -= 1;
                });
            }
            StmtKind::Break | StmtKind::Continue => {
                if self.loop_depth == 0 {
                    self.diags.push(Diagnostic::error(loc, "`break`/`continue` outside of a loop"));
                }
            }
            StmtKind::Return(value) => match (value, self.ret) {
                (Some(v), Some(_)) => self.expr(v, true),
                (Some(v), None) => {
                    self.expr(v, true);
                    self.diags.push(Diagnostic::error(loc, "void function returns a value"));
                }
                (None, Some(_)) => self.diags.push(Diagnostic::error(loc, "non-void function returns no value")),
                (None, None) => {}
            },
            StmtKind::Block(items) => self.scoped(|r| r.stmts(items)),
            StmtKind::Assert(e) | StmtKind::Assume(e) => self.expr(e, false),
            StmtKind::Noop(_) => {}
        }
    }

    /// Resolve and type an expression. `call_ok` permits a user call at the root.
    fn expr(&mut self, e: &mut Expr, call_ok: bool) {
        let loc = e.meta.loc;
        match &mut e.kind {
            ExprKind::Lit(_) | ExprKind::Nondet(_) => {}
            ExprKind::Var(v) => {
                self.resolve_ref(v, loc);
                e.ty = v.ty;
            }
            ExprKind::Unary(op, inner) => {
                self.expr(inner, false);
                e.ty = match op {
                    UnOp::Not => IntType::I32,
                    UnOp::Neg | UnOp::BitNot => inner.ty.promoted(),
                };
            }
            ExprKind::Binary { op, lhs, rhs, op_ty } => {
                self.expr(lhs, false);
                self.expr(rhs, false);
                let (operands, result) = if op.is_logical() {
                    (IntType::I32, IntType::I32)
                } else if op.is_shift() {
                    (lhs.ty.promoted(), lhs.ty.promoted())
                } else if op.is_comparison() {
                    (IntType::usual_arithmetic(lhs.ty, rhs.ty), IntType::I32)
                } else {
                    let t = IntType::usual_arithmetic(lhs.ty, rhs.ty);
                    (t, t)
                };
                *op_ty = operands;
                e.ty = result;
            }
            ExprKind::Cast(inner) => self.expr(inner, false),
            ExprKind::Call(name, args) => {
                for a in args.iter_mut() {
                    self.expr(a, false);
                }
                if !call_ok {
                    self.diags.push(Diagnostic::unsupported(
                        loc,
                        "function call nested inside an expression (calls must be a whole statement or right-hand side)",
                    ));
                }
                match self.functions.get(name.as_str()) {
                    None => self.diags.push(Diagnostic::error(loc, format!("call to undefined function `{name}`"))),
                    Some((ret, params)) => {
                        if params.len() != args.len() {
                            self.diags.push(Diagnostic::error(
                                loc,
                                format!("`{name}` expects {} arguments, got {}", params.len(), args.len()),
                            ));
                        }
                        // void calls get a placeholder type; only statement position is valid for them
                        e.ty = ret.unwrap_or(IntType::I32);
                        if ret.is_none() && !call_ok {
                            self.diags.push(Diagnostic::error(loc, format!("void function `{name}` used as a value")));
                        }
                    }
                }
            }
        }
    }
}

/// Report a void call used as a value (`x = f()` where `f` is void).
pub(super) fn check_void_values(p: &Program) -> Vec<Diagnostic> {
    let void_fns: BTreeSet<&str> = p.functions.iter().filter(|f| f.ret.is_none()).map(|f| f.name.as_str()).collect();
    let mut diags = Vec::new();
    p.walk(&mut |_, s| {
        let value = match &s.kind {
            StmtKind::Decl(d) => d.init.as_ref(),
            StmtKind::Assign { value, .. } => Some(value),
            StmtKind::Return(v) => v.as_ref(),
            _ => None,
        };
        if let Some(Expr { kind: ExprKind::Call(name, _), meta, .. }) = value {
            if void_fns.contains(name.as_str()) {
                diags.push(Diagnostic::error(meta.loc, format!("void function `{name}` used as a value")));
            }
        }
    });
    diags
}

/// Direct callees of each function, in first-call order.
pub fn call_graph(p: &Program) -> BTreeMap<String, Vec<(String, Loc)>> {
    let mut graph = BTreeMap::new();
    for f in &p.functions {
        let mut callees: Vec<(String, Loc)> = Vec::new();
        f.walk(&mut |s| {
            s.own_exprs(&mut |e| {
                e.walk(&mut |x| {
                    if let ExprKind::Call(name, _) = &x.kind {
                        if !callees.iter().any(|(n, _)| n == name) {
                            callees.push((name.clone(), x.meta.loc));
                        }
                    }
                })
            })
        });
        graph.insert(f.name.clone(), callees);
    }
    graph
}

/// Functions in callee-before-caller order, or the first cycle found as a diagnostic.
pub fn topological_order(p: &Program) -> Result<Vec<String>, Diagnostic> {
    let graph = call_graph(p);
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    let mut mark: BTreeMap<&str, Mark> = graph.keys().map(|k| (k.as_str(), Mark::Fresh)).collect();
    let mut order = Vec::new();

    fn visit<'a>(
        name: &'a str,
        graph: &'a BTreeMap<String, Vec<(String, Loc)>>,
        mark: &mut BTreeMap<&'a str, Mark>,
        order: &mut Vec<String>,
    ) -> Result<(), Diagnostic> {
        mark.insert(name, Mark::Active);
        for (callee, loc) in graph.get(name).into_iter().flatten() {
            match mark.get(callee.as_str()).copied() {
                Some(Mark::Active) => {
                    let what = if callee == name { "recursion" } else { "recursion (cyclic call graph)" };
                    return Err(Diagnostic::unsupported(*loc, &format!("{what} through `{callee}`")));
                }
                Some(Mark::Fresh) => visit(callee, graph, mark, order)?,
                _ => {}
            }
        }
        mark.insert(name, Mark::Done);
        order.push(name.to_string());
        Ok(())
    }

    for f in &p.functions {
        if mark[f.name.as_str()] == Mark::Fresh {
            visit(&f.name, &graph, &mut mark, &mut order)?;
        }
    }
    Ok(order)
}
