//! Loop unrolling and call inlining.
//!
//! The result is loop-free but still structured: `break`, `continue` and
//! `return` become [`UStmt::Exit`] jumps to the end of the innermost
//! [`UStmt::Scope`] of the matching kind.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use crate::frontend::{BinOp, Expr, ExprKind, Function, IntType, NodeId, Program, Stmt, StmtKind, UnOp, VarId};
use crate::instrument::InstrumentedProgram;

use super::EncodeError;

/// A variable inside one inlined call frame. Frame 0 holds globals and `main`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarKey {
    pub var: VarId,
    pub frame: u32,
}

/// Return slot of an inlined call.
pub const RET_VAR: VarId = VarId(u32::MAX);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UExpr {
    Lit(IntType, u64),
    Var(VarKey, IntType),
    Unary(UnOp, IntType, Box<UExpr>),
    Binary { op: BinOp, op_ty: IntType, ty: IntType, lhs: Box<UExpr>, rhs: Box<UExpr> },
    /// Conversion of the operand to `IntType`.
    Cast(IntType, Box<UExpr>),
    Nondet(IntType, NodeId),
}

impl UExpr {
    pub fn ty(&self) -> IntType {
        match self {
            UExpr::Lit(t, _) | UExpr::Var(_, t) | UExpr::Unary(_, t, _) | UExpr::Cast(t, _) | UExpr::Nondet(t, _) => *t,
            UExpr::Binary { ty, .. } => *ty,
        }
    }

    fn convert(self, to: IntType) -> UExpr {
        if self.ty() == to {
            self
        } else {
            UExpr::Cast(to, Box::new(self))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Break,
    Continue,
    Return,
}

/// Marks entry to copy `copy` of a loop body (one header visit).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterTag {
    pub loop_id: NodeId,
    pub loop_index: usize,
    /// Static occurrence of this loop in the unrolled program (1-based).
    pub instance: u32,
    pub copy: u32,
    pub state: Vec<VarKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UStmt {
    Assign { key: VarKey, value: UExpr },
    /// Evaluate for effect (nondet consumption, division checks).
    Eval(UExpr),
    If { cond: UExpr, then: Vec<UStmt>, els: Vec<UStmt> },
    Scope { kind: ExitKind, body: Vec<UStmt> },
    Exit(ExitKind),
    Assume(UExpr),
    /// Unwinding assumption closing a loop occurrence.
    Unwind { loop_id: NodeId, cond: UExpr },
    /// Recurrent-state assertion of a loop gadget.
    Check { loop_index: usize, assertion: NodeId, cond: UExpr },
    LoopEntry { loop_id: NodeId, loop_index: usize, instance: u32 },
    Tag(IterTag),
}

#[derive(Debug, Clone)]
pub struct UnrolledProgram {
    pub bound: u32,
    pub body: Vec<UStmt>,
    pub names: HashMap<VarKey, (String, IntType)>,
    /// Nondet call site → loop index for gadget flags.
    pub flag_sites: HashMap<NodeId, usize>,
    pub statements: usize,
    pub unwind_assumptions: usize,
}

const MAX_STATEMENTS: usize = 20_000_000;

struct Unroller<'a> {
    p: &'a Program,
    k: u32,
    frames: u32,
    names: HashMap<VarKey, (String, IntType)>,
    loop_index: HashMap<NodeId, usize>,
    state_vars: HashMap<NodeId, Vec<VarId>>,
    globals: HashSet<VarId>,
    assertions: HashMap<NodeId, usize>,
    instances: HashMap<NodeId, u32>,
    decls: HashMap<VarId, (String, IntType)>,
    statements: usize,
    unwinds: usize,
    deadline: Option<Instant>,
}

/// Unroll every loop of `ip` to `k` copies and inline all calls.
pub fn unroll(ip: &InstrumentedProgram, k: u32) -> UnrolledProgram {
    unroll_until(ip, k, None).expect("no deadline")
}

pub fn unroll_until(ip: &InstrumentedProgram, k: u32, deadline: Option<Instant>) -> Result<UnrolledProgram, EncodeError> {
    assert!(k >= 1, "unwind bound must be positive");
    let p = &ip.program;
    let mut u = Unroller {
        p,
        k,
        frames: 0,
        names: HashMap::new(),
        loop_index: ip.sites.iter().map(|s| (s.loop_id, s.index)).collect(),
        state_vars: ip.sites.iter().map(|s| (s.loop_id, s.state_vars.iter().map(|v| v.id).collect())).collect(),
        globals: p.globals.iter().map(|g| g.id).collect(),
        assertions: ip.gadgets.values().map(|g| (g.assertion, g.index)).collect(),
        instances: HashMap::new(),
        decls: declarations(p),
        statements: 0,
        unwinds: 0,
        deadline,
    };
    let mut body = Vec::new();
    for g in &p.globals {
        let key = VarKey { var: g.id, frame: 0 };
        u.names.insert(key, (g.name.clone(), g.ty));
        let value = match &g.init {
            Some(e) => u.expr(e, 0).convert(g.ty),
            None => UExpr::Lit(g.ty, 0),
        };
        body.push(UStmt::Assign { key, value });
    }
    let main = p.entry_function();
    let mut main_body = Vec::new();
    u.stmts(&main.body, 0, &mut main_body)?;
    body.push(UStmt::Scope { kind: ExitKind::Return, body: main_body });
    Ok(UnrolledProgram {
        bound: k,
        body,
        names: u.names,
        flag_sites: ip.gadgets.values().map(|g| (g.flag_site, g.index)).collect(),
        statements: u.statements,
        unwind_assumptions: u.unwinds,
    })
}

impl<'a> Unroller<'a> {
    fn key(&mut self, var: VarId, frame: u32, name: &str, ty: IntType) -> VarKey {
        let frame = if self.globals.contains(&var) { 0 } else { frame };
        let key = VarKey { var, frame };
        self.names.entry(key).or_insert_with(|| (name.to_string(), ty));
        key
    }

    fn expr(&mut self, e: &Expr, frame: u32) -> UExpr {
        match &e.kind {
            ExprKind::Lit(v) => UExpr::Lit(e.ty, *v),
            ExprKind::Var(v) => UExpr::Var(self.key(v.id, frame, &v.name, v.ty), v.ty),
            ExprKind::Unary(op, inner) => {
                let x = self.expr(inner, frame);
                match op {
                    UnOp::Not => UExpr::Unary(UnOp::Not, e.ty, Box::new(x)),
                    _ => UExpr::Unary(*op, e.ty, Box::new(x.convert(e.ty))),
                }
            }
            ExprKind::Binary { op, lhs, rhs, op_ty } => {
                let (l, r) = (self.expr(lhs, frame), self.expr(rhs, frame));
                let (l, r) = if op.is_logical() { (l, r) } else { (l.convert(*op_ty), r.convert(*op_ty)) };
                UExpr::Binary { op: *op, op_ty: *op_ty, ty: e.ty, lhs: Box::new(l), rhs: Box::new(r) }
            }
            ExprKind::Cast(inner) => self.expr(inner, frame).convert(e.ty),
            ExprKind::Nondet(_) => UExpr::Nondet(e.ty, e.meta.id),
            ExprKind::Call(..) => unreachable!("calls are lowered at statement level"),
        }
    }

    fn count(&mut self) -> Result<(), EncodeError> {
        self.statements += 1;
        if self.statements > MAX_STATEMENTS {
            return Err(EncodeError::TooLarge(self.statements));
        }
        if self.statements.is_multiple_of(4096) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(EncodeError::Timeout);
                }
            }
        }
        Ok(())
    }

    /// Lower `e` as a right-hand side, inlining a call if it is one.
    fn rhs(&mut self, e: &Expr, frame: u32, out: &mut Vec<UStmt>) -> Result<UExpr, EncodeError> {
        if let ExprKind::Call(name, args) = &e.kind {
            let f = self.p.function(name).expect("resolved call");
            let ret = self.inline(f, args, frame, out)?;
            let rt = f.ret.unwrap_or(IntType::I32);
            return Ok(UExpr::Var(ret, rt));
        }
        Ok(self.expr(e, frame))
    }

    fn inline(&mut self, f: &'a Function, args: &[Expr], frame: u32, out: &mut Vec<UStmt>) -> Result<VarKey, EncodeError> {
        self.frames += 1;
        let callee = self.frames;
        for (param, arg) in f.params.iter().zip(args) {
            let value = self.expr(arg, frame).convert(param.ty);
            let key = self.key(param.id, callee, &param.name, param.ty);
            out.push(UStmt::Assign { key, value });
        }
        let rt = f.ret.unwrap_or(IntType::I32);
        let ret = self.key(RET_VAR, callee, &format!("{}$ret", f.name), rt);
        out.push(UStmt::Assign { key: ret, value: UExpr::Lit(rt, 0) });
        let mut body = Vec::new();
        self.stmts(&f.body, callee, &mut body)?;
        out.push(UStmt::Scope { kind: ExitKind::Return, body });
        Ok(ret)
    }

    fn stmts(&mut self, stmts: &'a [Stmt], frame: u32, out: &mut Vec<UStmt>) -> Result<(), EncodeError> {
        for s in stmts {
            self.stmt(s, frame, out)?;
        }
        Ok(())
    }

    fn truth(&mut self, e: &Expr, frame: u32) -> UExpr {
        self.expr(e, frame)
    }

    fn stmt(&mut self, s: &'a Stmt, frame: u32, out: &mut Vec<UStmt>) -> Result<(), EncodeError> {
        self.count()?;
        match &s.kind {
            StmtKind::Decl(d) => {
                let value = match &d.init {
                    Some(e) => self.rhs(e, frame, out)?.convert(d.ty),
                    None => UExpr::Lit(d.ty, 0),
                };
                let key = self.key(d.id, frame, &d.name, d.ty);
                out.push(UStmt::Assign { key, value });
            }
            StmtKind::Assign { target, op, value } => {
                let rhs = self.rhs(value, frame, out)?;
                let key = self.key(target.id, frame, &target.name, target.ty);
                let value = match op {
                    None => rhs.convert(target.ty),
                    Some(op) => {
                        let op_ty = if op.is_shift() {
                            target.ty.promoted()
                        } else {
                            IntType::usual_arithmetic(target.ty, value.ty)
                        };
                        let cur = UExpr::Var(key, target.ty).convert(op_ty);
                        UExpr::Binary {
                            op: *op,
                            op_ty,
                            ty: op_ty,
                            lhs: Box::new(cur),
                            rhs: Box::new(rhs.convert(op_ty)),
                        }
                        .convert(target.ty)
                    }
                };
                out.push(UStmt::Assign { key, value });
            }
            StmtKind::Expr(e) => {
                let v = self.rhs(e, frame, out)?;
                if !matches!(e.kind, ExprKind::Call(..)) {
                    out.push(UStmt::Eval(v));
                }
            }
            StmtKind::If { cond, then, els } => {
                let cond = self.truth(cond, frame);
                let mut t = Vec::new();
                self.stmt(then, frame, &mut t)?;
                let mut e = Vec::new();
                if let Some(x) = els {
                    self.stmt(x, frame, &mut e)?;
                }
                out.push(UStmt::If { cond, then: t, els: e });
            }
            StmtKind::While { cond, body } => {
                self.unroll_loop(s, Some(cond), &[], body, false, frame, out)?;
            }
            StmtKind::DoWhile { body, cond } => {
                self.unroll_loop(s, Some(cond), &[], body, true, frame, out)?;
            }
            StmtKind::For { init, cond, update, body } => {
                self.stmts(init, frame, out)?;
                self.unroll_loop(s, cond.as_ref(), update, body, false, frame, out)?;
            }
            StmtKind::Break => out.push(UStmt::Exit(ExitKind::Break)),
            StmtKind::Continue => out.push(UStmt::Exit(ExitKind::Continue)),
            StmtKind::Return(v) => {
                if let Some(e) = v {
                    let f_ret = self.current_ret(frame);
                    let value = self.rhs(e, frame, out)?;
                    match f_ret {
                        Some((key, rt)) => out.push(UStmt::Assign { key, value: value.convert(rt) }),
                        None => out.push(UStmt::Eval(value)),
                    }
                }
                out.push(UStmt::Exit(ExitKind::Return));
            }
            StmtKind::Block(items) => self.stmts(items, frame, out)?,
            StmtKind::Assert(e) => {
                let cond = self.truth(e, frame);
                match self.assertions.get(&s.meta.id) {
                    Some(&loop_index) => out.push(UStmt::Check { loop_index, assertion: s.meta.id, cond }),
                    // a user assertion that survived instrumentation has no effect
                    None => {}
                }
            }
            StmtKind::Assume(e) => {
                let cond = self.truth(e, frame);
                out.push(UStmt::Assume(cond));
            }
            StmtKind::Noop(_) => {}
        }
        Ok(())
    }

    /// Return slot of the frame, if the frame belongs to an inlined non-void call.
    fn current_ret(&self, frame: u32) -> Option<(VarKey, IntType)> {
        let key = VarKey { var: RET_VAR, frame };
        self.names.get(&key).map(|(_, ty)| (key, *ty))
    }

    #[allow(clippy::too_many_arguments)]
    fn unroll_loop(
        &mut self,
        s: &'a Stmt,
        cond: Option<&'a Expr>,
        update: &'a [Stmt],
        body: &'a Stmt,
        do_while: bool,
        frame: u32,
        out: &mut Vec<UStmt>,
    ) -> Result<(), EncodeError> {
        let loop_id = s.meta.id;
        let loop_index = self.loop_index.get(&loop_id).copied().unwrap_or(usize::MAX);
        let instance = {
            let n = self.instances.entry(loop_id).or_insert(0);
            *n += 1;
            *n
        };
        let state: Vec<VarKey> = self
            .state_vars
            .get(&loop_id)
            .cloned()
            .unwrap_or_default()
            .into_iter()
            .map(|v| {
                let (name, ty) = self.var_info(v);
                self.key(v, frame, &name, ty)
            })
            .collect();
        out.push(UStmt::LoopEntry { loop_id, loop_index, instance });
        let cond_expr = |u: &mut Self| match cond {
            Some(c) => u.truth(c, frame),
            None => UExpr::Lit(IntType::I32, 1),
        };
        let not = |c: UExpr| UExpr::Unary(UnOp::Not, IntType::I32, Box::new(c));
        let mut seq = Vec::new();
        for copy in 1..=self.k {
            if !do_while {
                let c = cond_expr(self);
                seq.push(UStmt::If { cond: c, then: vec![], els: vec![UStmt::Exit(ExitKind::Break)] });
            }
            seq.push(UStmt::Tag(IterTag { loop_id, loop_index, instance, copy, state: state.clone() }));
            let mut b = Vec::new();
            self.stmt(body, frame, &mut b)?;
            seq.push(UStmt::Scope { kind: ExitKind::Continue, body: b });
            for u in update {
                self.stmt(u, frame, &mut seq)?;
            }
            if do_while && copy < self.k {
                let c = cond_expr(self);
                seq.push(UStmt::If { cond: c, then: vec![], els: vec![UStmt::Exit(ExitKind::Break)] });
            }
        }
        let c = cond_expr(self);
        seq.push(UStmt::Unwind { loop_id, cond: not(c) });
        self.unwinds += 1;
        out.push(UStmt::Scope { kind: ExitKind::Break, body: seq });
        Ok(())
    }

    fn var_info(&self, v: VarId) -> (String, IntType) {
        self.decls.get(&v).cloned().expect("state variable is declared")
    }
}

fn declarations(p: &Program) -> HashMap<VarId, (String, IntType)> {
    let mut out: HashMap<VarId, (String, IntType)> = p.globals.iter().map(|g| (g.id, (g.name.clone(), g.ty))).collect();
    for f in &p.functions {
        out.extend(f.params.iter().map(|d| (d.id, (d.name.clone(), d.ty))));
    }
    p.walk(&mut |_, s| {
        if let StmtKind::Decl(d) = &s.kind {
            out.insert(d.id, (d.name.clone(), d.ty));
        }
    });
    out
}
