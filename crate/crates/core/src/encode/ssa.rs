//! Symbolic execution of an unrolled program into SSA terms.
//!
//! Assumptions and division side conditions are folded into the path guard,
//! so each obligation is guarded exactly by what precedes it on its path.

use std::collections::HashMap;
use std::time::Instant;

use crate::frontend::{BinOp, IntType, NodeId, UnOp};

use super::term::{SymId, TermId, TermStore};
use super::unroll::{ExitKind, IterTag, UExpr, UStmt, UnrolledProgram, VarKey};
use super::EncodeError;

/// One recurrent-state assertion occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obligation {
    pub loop_index: usize,
    pub loop_id: NodeId,
    pub instance: u32,
    pub copy: u32,
    pub assertion: NodeId,
    pub guard: TermId,
    pub violation: TermId,
}

/// Where a gadget flag symbol was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlagOf {
    pub loop_index: usize,
    pub instance: u32,
    pub copy: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    LoopEntry { loop_id: NodeId, loop_index: usize, instance: u32, guard: TermId },
    Header { loop_id: NodeId, loop_index: usize, instance: u32, copy: u32, guard: TermId, state: Vec<StateTerm> },
    Nondet { sym: SymId, term: TermId, ty: IntType, site: NodeId, guard: TermId, flag: Option<FlagOf> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTerm {
    pub name: String,
    pub ty: IntType,
    pub term: TermId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsaDef {
    pub name: String,
    pub version: u32,
    pub term: TermId,
    pub guard: TermId,
}

#[derive(Debug, Clone)]
pub struct SsaProgram {
    pub bound: u32,
    pub store: TermStore,
    pub defs: Vec<SsaDef>,
    pub obligations: Vec<Obligation>,
    pub events: Vec<Event>,
}

struct Scope {
    kind: ExitKind,
    exits: Vec<(TermId, HashMap<VarKey, TermId>)>,
}

struct Exec<'a> {
    u: &'a UnrolledProgram,
    s: TermStore,
    vars: HashMap<VarKey, TermId>,
    versions: HashMap<VarKey, u32>,
    guard: TermId,
    scopes: Vec<Scope>,
    tags: HashMap<usize, (NodeId, u32, u32)>,
    defs: Vec<SsaDef>,
    obligations: Vec<Obligation>,
    events: Vec<Event>,
    nondets: usize,
    steps: usize,
    deadline: Option<Instant>,
}

/// Symbolically execute `u`.
pub fn to_ssa(u: &UnrolledProgram) -> SsaProgram {
    to_ssa_until(u, None).expect("no deadline")
}

pub fn to_ssa_until(u: &UnrolledProgram, deadline: Option<Instant>) -> Result<SsaProgram, EncodeError> {
    let mut s = TermStore::new();
    let guard = s.tt();
    let mut x = Exec {
        u,
        s,
        vars: HashMap::new(),
        versions: HashMap::new(),
        guard,
        scopes: Vec::new(),
        tags: HashMap::new(),
        defs: Vec::new(),
        obligations: Vec::new(),
        events: Vec::new(),
        nondets: 0,
        steps: 0,
        deadline,
    };
    x.block(&u.body)?;
    Ok(SsaProgram { bound: u.bound, store: x.s, defs: x.defs, obligations: x.obligations, events: x.events })
}

type Vars = HashMap<VarKey, TermId>;

impl Exec<'_> {
    fn block(&mut self, stmts: &[UStmt]) -> Result<(), EncodeError> {
        for st in stmts {
            self.stmt(st)?;
        }
        Ok(())
    }

    fn tick(&mut self) -> Result<(), EncodeError> {
        self.steps += 1;
        if self.steps.is_multiple_of(4096) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(EncodeError::Timeout);
                }
            }
        }
        Ok(())
    }

    /// Record obligations inside code that no path reaches.
    fn dead(&mut self, st: &UStmt) {
        match st {
            UStmt::Check { loop_index, assertion, .. } => {
                let (loop_id, instance, copy) = self.tags.get(loop_index).copied().unwrap_or_default();
                let ff = self.s.ff();
                self.obligations.push(Obligation {
                    loop_index: *loop_index,
                    loop_id,
                    instance,
                    copy,
                    assertion: *assertion,
                    guard: ff,
                    violation: ff,
                });
            }
            UStmt::If { then, els, .. } => then.iter().chain(els).for_each(|x| self.dead(x)),
            UStmt::Scope { body, .. } => body.iter().for_each(|x| self.dead(x)),
            _ => {}
        }
    }

    fn stmt(&mut self, st: &UStmt) -> Result<(), EncodeError> {
        self.tick()?;
        if self.s.is_false(self.guard) {
            self.dead(st);
            return Ok(());
        }
        match st {
            UStmt::Assign { key, value } => {
                let tt = self.s.tt();
                let t = self.eval(value, tt);
                self.assign(*key, t);
            }
            UStmt::Eval(e) => {
                let tt = self.s.tt();
                self.eval(e, tt);
            }
            UStmt::If { cond, then, els } => {
                let tt = self.s.tt();
                let v = self.eval(cond, tt);
                let c = self.s.truthy(v);
                self.branch(c, then, els)?;
            }
            UStmt::Scope { kind, body } => {
                self.scopes.push(Scope { kind: *kind, exits: Vec::new() });
                self.block(body)?;
                let scope = self.scopes.pop().expect("scope pushed above");
                for (g, vars) in scope.exits {
                    let fall = self.guard;
                    let merged = self.merge(g, &vars, &self.vars.clone());
                    self.vars = merged;
                    self.guard = self.s.or(g, fall);
                }
            }
            UStmt::Exit(kind) => {
                let snapshot = (self.guard, self.vars.clone());
                let scope = self.scopes.iter_mut().rev().find(|s| s.kind == *kind).expect("exit inside a matching scope");
                scope.exits.push(snapshot);
                self.guard = self.s.ff();
            }
            UStmt::Assume(e) | UStmt::Unwind { cond: e, .. } => {
                let tt = self.s.tt();
                let v = self.eval(e, tt);
                let c = self.s.truthy(v);
                self.guard = self.s.and(self.guard, c);
            }
            UStmt::Check { loop_index, assertion, cond } => {
                let tt = self.s.tt();
                let v = self.eval(cond, tt);
                let c = self.s.truthy(v);
                let violation = self.s.not(c);
                let (loop_id, instance, copy) = self.tags.get(loop_index).copied().unwrap_or_default();
                self.obligations.push(Obligation {
                    loop_index: *loop_index,
                    loop_id,
                    instance,
                    copy,
                    assertion: *assertion,
                    guard: self.guard,
                    violation,
                });
            }
            UStmt::LoopEntry { loop_id, loop_index, instance } => {
                self.events.push(Event::LoopEntry {
                    loop_id: *loop_id,
                    loop_index: *loop_index,
                    instance: *instance,
                    guard: self.guard,
                });
            }
            UStmt::Tag(IterTag { loop_id, loop_index, instance, copy, state }) => {
                self.tags.insert(*loop_index, (*loop_id, *instance, *copy));
                let state = state
                    .iter()
                    .map(|k| {
                        let (name, ty) = self.u.names[k].clone();
                        let term = self.read(*k, ty);
                        StateTerm { name, ty, term }
                    })
                    .collect();
                self.events.push(Event::Header {
                    loop_id: *loop_id,
                    loop_index: *loop_index,
                    instance: *instance,
                    copy: *copy,
                    guard: self.guard,
                    state,
                });
            }
        }
        Ok(())
    }

    fn branch(&mut self, c: TermId, then: &[UStmt], els: &[UStmt]) -> Result<(), EncodeError> {
        match self.s.as_const(c) {
            Some(1) => {
                els.iter().for_each(|x| self.dead(x));
                return self.block(then);
            }
            Some(_) => {
                then.iter().for_each(|x| self.dead(x));
                return self.block(els);
            }
            None => {}
        }
        let g0 = self.guard;
        let saved = self.vars.clone();
        let gt = self.s.and(g0, c);
        self.guard = gt;
        self.block(then)?;
        let (then_guard, then_vars) = (self.guard, std::mem::replace(&mut self.vars, saved));
        let nc = self.s.not(c);
        let ge = self.s.and(g0, nc);
        self.guard = ge;
        self.block(els)?;
        let else_vars = std::mem::take(&mut self.vars);
        self.vars = self.merge(c, &then_vars, &else_vars);
        self.guard = if then_guard == gt && self.guard == ge { g0 } else { self.s.or(then_guard, self.guard) };
        Ok(())
    }

    /// `ite(c, a, b)` per variable.
    fn merge(&mut self, c: TermId, a: &Vars, b: &Vars) -> Vars {
        let mut out = b.clone();
        for (k, &ta) in a {
            match b.get(k) {
                Some(&tb) if tb == ta => {}
                Some(&tb) => {
                    let m = self.s.ite(c, ta, tb);
                    out.insert(*k, m);
                }
                None => {
                    out.insert(*k, ta);
                }
            }
        }
        out
    }

    fn read(&mut self, k: VarKey, ty: IntType) -> TermId {
        match self.vars.get(&k) {
            Some(&t) => t,
            None => self.s.constant(ty.width, 0),
        }
    }

    fn assign(&mut self, key: VarKey, t: TermId) {
        let version = {
            let v = self.versions.entry(key).or_insert(0);
            *v += 1;
            *v
        };
        let name = self.u.names.get(&key).map(|(n, _)| n.clone()).unwrap_or_default();
        self.defs.push(SsaDef { name, version, term: t, guard: self.guard });
        self.vars.insert(key, t);
    }

    fn convert(&mut self, t: TermId, from: IntType, to: IntType) -> TermId {
        if to.is_bool() {
            return self.s.truthy(t);
        }
        let (fw, tw) = (from.width, to.width);
        if fw == tw {
            t
        } else if tw > fw {
            if from.signed {
                self.s.sext(t, tw)
            } else {
                self.s.zext(t, tw)
            }
        } else {
            self.s.extract(t, tw - 1, 0)
        }
    }

    fn bool_value(&mut self, b: TermId, ty: IntType) -> TermId {
        self.s.zext(b, ty.width)
    }

    fn fresh_nondet(&mut self, ty: IntType, site: NodeId, econd: TermId) -> TermId {
        let flag = self.u.flag_sites.get(&site).map(|&loop_index| {
            let (_, instance, copy) = self.tags.get(&loop_index).copied().unwrap_or_default();
            FlagOf { loop_index, instance, copy }
        });
        let name = match flag {
            Some(f) if f.instance <= 1 => format!("flag{}_{}", f.loop_index, f.copy),
            Some(f) => format!("flag{}_{}_i{}", f.loop_index, f.copy, f.instance),
            None => {
                self.nondets += 1;
                format!("nondet_{}_{}", ty.nondet_suffix(), self.nondets)
            }
        };
        let (sym, term) = self.s.sym(name, ty.width, ty.signed);
        let guard = self.s.and(self.guard, econd);
        self.events.push(Event::Nondet { sym, term, ty, site, guard, flag });
        term
    }

    /// Evaluate `e`; `econd` is the condition under which this subexpression
    /// is reached inside short-circuit operators.
    fn eval(&mut self, e: &UExpr, econd: TermId) -> TermId {
        match e {
            UExpr::Lit(ty, v) => self.s.constant(ty.width, *v),
            UExpr::Var(k, ty) => self.read(*k, *ty),
            UExpr::Unary(op, ty, x) => {
                let v = self.eval(x, econd);
                match op {
                    UnOp::Not => {
                        let b = self.s.truthy(v);
                        let nb = self.s.not(b);
                        self.bool_value(nb, *ty)
                    }
                    UnOp::Neg => self.s.neg(v),
                    UnOp::BitNot => self.s.not(v),
                }
            }
            UExpr::Binary { op, op_ty, ty, lhs, rhs } if op.is_logical() => {
                let l = self.eval(lhs, econd);
                let lb = self.s.truthy(l);
                let reach = if *op == BinOp::LogAnd { lb } else { self.s.not(lb) };
                let rcond = self.s.and(econd, reach);
                let r = self.eval(rhs, rcond);
                let rb = self.s.truthy(r);
                let _ = op_ty;
                let b = if *op == BinOp::LogAnd { self.s.and(lb, rb) } else { self.s.or(lb, rb) };
                self.bool_value(b, *ty)
            }
            UExpr::Binary { op, op_ty, ty, lhs, rhs } => {
                let a = self.eval(lhs, econd);
                let b = self.eval(rhs, econd);
                self.binop(*op, *op_ty, *ty, a, b, econd)
            }
            UExpr::Cast(to, x) => {
                let v = self.eval(x, econd);
                self.convert(v, x.ty(), *to)
            }
            UExpr::Nondet(ty, site) => self.fresh_nondet(*ty, *site, econd),
        }
    }

    fn binop(&mut self, op: BinOp, op_ty: IntType, ty: IntType, a: TermId, b: TermId, econd: TermId) -> TermId {
        let s = &mut self.s;
        let signed = op_ty.signed;
        let cmp = |s: &mut TermStore, bit: TermId| s.zext(bit, ty.width);
        match op {
            BinOp::Add => s.add(a, b),
            BinOp::Sub => s.sub(a, b),
            BinOp::Mul => s.mul(a, b),
            BinOp::Div | BinOp::Rem => {
                let nz = s.truthy(b);
                let ok = s.implies(econd, nz);
                self.guard = s.and(self.guard, ok);
                match (op, signed) {
                    (BinOp::Div, true) => s.sdiv(a, b),
                    (BinOp::Div, false) => s.udiv(a, b),
                    (_, true) => s.srem(a, b),
                    (_, false) => s.urem(a, b),
                }
            }
            BinOp::Shl | BinOp::Shr => {
                let m = s.constant(op_ty.width, op_ty.width as u64 - 1);
                let amount = s.and(b, m);
                match (op, signed) {
                    (BinOp::Shl, _) => s.shl(a, amount),
                    (_, true) => s.ashr(a, amount),
                    (_, false) => s.lshr(a, amount),
                }
            }
            BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => {
                let (x, y) = if matches!(op, BinOp::Lt | BinOp::Le) { (a, b) } else { (b, a) };
                let bit = match (op, signed) {
                    (BinOp::Lt | BinOp::Gt, true) => s.slt(x, y),
                    (BinOp::Lt | BinOp::Gt, false) => s.ult(x, y),
                    (_, true) => s.sle(x, y),
                    (_, false) => s.ule(x, y),
                };
                cmp(s, bit)
            }
            BinOp::Eq => {
                let bit = s.eq(a, b);
                cmp(s, bit)
            }
            BinOp::Ne => {
                let bit = s.ne(a, b);
                cmp(s, bit)
            }
            BinOp::BitAnd => s.and(a, b),
            BinOp::BitOr => s.or(a, b),
            BinOp::BitXor => s.xor(a, b),
            BinOp::LogAnd | BinOp::LogOr => unreachable!("handled with short-circuit evaluation"),
        }
    }
}

/// Term for `op` applied at operand type `ty`, for semantics cross-checks.
/// Returns the value and the side condition (false for division by zero).
pub fn binop_term(s: &mut TermStore, op: BinOp, ty: IntType, a: TermId, b: TermId) -> (TermId, TermId) {
    let u = UnrolledProgram {
        bound: 1,
        body: Vec::new(),
        names: HashMap::new(),
        flag_sites: HashMap::new(),
        statements: 0,
        unwind_assumptions: 0,
    };
    let guard = s.tt();
    let mut x = Exec {
        u: &u,
        s: std::mem::take(s),
        vars: HashMap::new(),
        versions: HashMap::new(),
        guard,
        scopes: Vec::new(),
        tags: HashMap::new(),
        defs: Vec::new(),
        obligations: Vec::new(),
        events: Vec::new(),
        nondets: 0,
        steps: 0,
        deadline: None,
    };
    let result_ty = if op.is_comparison() || op.is_logical() { IntType::I32 } else { ty };
    let tt = x.s.tt();
    let v = if op.is_logical() {
        let la = x.s.truthy(a);
        let lb = x.s.truthy(b);
        let r = if op == BinOp::LogAnd { x.s.and(la, lb) } else { x.s.or(la, lb) };
        x.bool_value(r, result_ty)
    } else {
        x.binop(op, ty, result_ty, a, b, tt)
    };
    let g = x.guard;
    *s = x.s;
    (v, g)
}
