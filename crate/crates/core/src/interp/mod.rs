//! Concrete interpreter for MiniC.
//!
//! It shares no code with the symbolic encoder. Values are raw bit patterns
//! masked to their type, and every operator goes through [`ops`].

pub mod ops;
mod validate;

pub use validate::{validate_witness, ValidationResult};

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::frontend::{BinOp, Expr, ExprKind, Function, IntType, NodeId, Program, Stmt, StmtKind, UnOp, VarDecl, VarId};

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

/// One value returned by a nondet call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NondetValue {
    #[serde(rename = "type")]
    pub ty: IntType,
    pub value: i128,
}

impl NondetValue {
    pub fn new(ty: IntType, value: i128) -> NondetValue {
        NondetValue { ty, value }
    }
}

pub type NondetSequence = Vec<NondetValue>;

/// Supplies nondet values. `site` is the node id of the nondet call.
pub trait NondetSource {
    fn next(&mut self, ty: IntType, site: NodeId) -> Option<u64>;
}

/// Replays a fixed sequence. Sites listed in `forced_false` return 0 without
/// consuming a value; this pins instrumentation flags off.
#[derive(Debug, Clone, Default)]
pub struct SequenceSource {
    pub values: NondetSequence,
    pub pos: usize,
    pub forced_false: HashSet<NodeId>,
}

impl SequenceSource {
    pub fn new(values: NondetSequence) -> SequenceSource {
        SequenceSource { values, pos: 0, forced_false: HashSet::new() }
    }
}

impl NondetSource for SequenceSource {
    fn next(&mut self, ty: IntType, site: NodeId) -> Option<u64> {
        if self.forced_false.contains(&site) {
            return Some(0);
        }
        let v = self.values.get(self.pos)?;
        self.pos += 1;
        Some(ty.from_i128(v.value))
    }
}

impl<F: FnMut(IntType, NodeId) -> Option<u64>> NondetSource for F {
    fn next(&mut self, ty: IntType, site: NodeId) -> Option<u64> {
        self(ty, site)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssertMode {
    /// Assertions have no effect.
    #[default]
    Ignore,
    /// A failing assertion stops the run.
    Stop,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub step_limit: u64,
    pub asserts: AssertMode,
    /// Variables to snapshot per loop; loops not listed snapshot everything in scope.
    pub watch: BTreeMap<NodeId, Vec<VarId>>,
    pub record_visits: bool,
    pub record_assignments: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            step_limit: DEFAULT_STEP_LIMIT,
            asserts: AssertMode::Ignore,
            watch: BTreeMap::new(),
            record_visits: true,
            record_assignments: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarValue {
    pub var: VarId,
    pub name: String,
    #[serde(rename = "type")]
    pub ty: IntType,
    pub value: i128,
}

/// Snapshot taken each time control enters a loop body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderVisit {
    pub loop_id: NodeId,
    /// 1-based count of how often the loop statement has been entered.
    pub activation: u32,
    /// 1-based iteration index within the activation.
    pub visit: u32,
    pub state: Vec<VarValue>,
}

impl HeaderVisit {
    pub fn values(&self) -> Vec<i128> {
        self.state.iter().map(|v| v.value).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub node: NodeId,
    pub var: VarId,
    pub value: i128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Returned(Option<i128>),
    NondetExhausted,
    StepLimit,
    /// An assumption failed or a division by zero was reached.
    Infeasible(NodeId),
    AssertionFailed(NodeId),
}

#[derive(Debug, Clone)]
pub struct ExecutionLog {
    pub status: RunStatus,
    pub steps: u64,
    /// Nondet calls evaluated, including any answered by a pinned site.
    pub nondets_consumed: usize,
    pub visits: Vec<HeaderVisit>,
    pub assignments: Vec<Assignment>,
}

impl ExecutionLog {
    /// Visits of one loop activation, in order.
    pub fn visits_of(&self, loop_id: NodeId, activation: u32) -> impl Iterator<Item = &HeaderVisit> {
        self.visits.iter().filter(move |v| v.loop_id == loop_id && v.activation == activation)
    }

    pub fn visit(&self, loop_id: NodeId, activation: u32, visit: u32) -> Option<&HeaderVisit> {
        self.visits_of(loop_id, activation).find(|v| v.visit == visit)
    }
}

/// Run `p` from its entry function.
pub fn run(p: &Program, inputs: &mut dyn NondetSource, cfg: &RunConfig) -> ExecutionLog {
    let mut m = Machine {
        p,
        inputs,
        cfg,
        values: HashMap::new(),
        info: HashMap::new(),
        globals: Vec::new(),
        frames: Vec::new(),
        rets: Vec::new(),
        activations: HashMap::new(),
        steps: 0,
        consumed: 0,
        visits: Vec::new(),
        assignments: Vec::new(),
    };
    let status = m.start();
    ExecutionLog {
        status,
        steps: m.steps,
        nondets_consumed: m.consumed,
        visits: m.visits,
        assignments: m.assignments,
    }
}

/// Run with a fixed nondet sequence.
pub fn run_sequence(p: &Program, seq: &[NondetValue], cfg: &RunConfig) -> ExecutionLog {
    let mut src = SequenceSource::new(seq.to_vec());
    run(p, &mut src, cfg)
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Option<u64>),
}

type Exec<T> = Result<T, RunStatus>;

struct Machine<'a> {
    p: &'a Program,
    inputs: &'a mut dyn NondetSource,
    cfg: &'a RunConfig,
    values: HashMap<VarId, u64>,
    info: HashMap<VarId, (&'a str, IntType)>,
    globals: Vec<VarId>,
    /// Per call frame, a stack of lexical scopes.
    frames: Vec<Vec<Vec<VarId>>>,
    /// Return type of each active call.
    rets: Vec<Option<IntType>>,
    activations: HashMap<NodeId, u32>,
    steps: u64,
    consumed: usize,
    visits: Vec<HeaderVisit>,
    assignments: Vec<Assignment>,
}

impl<'a> Machine<'a> {
    fn start(&mut self) -> RunStatus {
        for g in &self.p.globals {
            let v = match &g.init {
                Some(e) => match self.eval(e) {
                    Ok(v) => ops::convert(v, e.ty, g.ty),
                    Err(s) => return s,
                },
                None => 0,
            };
            self.info.insert(g.id, (&g.name, g.ty));
            self.values.insert(g.id, v);
            self.globals.push(g.id);
        }
        let main = self.p.entry_function();
        match self.call(main, Vec::new()) {
            Ok(v) => RunStatus::Returned(v.map(|bits| main.ret.unwrap_or(IntType::I32).to_i128(bits))),
            Err(s) => s,
        }
    }

    fn tick(&mut self) -> Exec<()> {
        self.steps += 1;
        if self.steps > self.cfg.step_limit {
            Err(RunStatus::StepLimit)
        } else {
            Ok(())
        }
    }

    fn scopes(&mut self) -> &mut Vec<Vec<VarId>> {
        self.frames.last_mut().expect("inside a call frame")
    }

    fn declare(&mut self, d: &'a VarDecl, value: u64) {
        self.info.insert(d.id, (&d.name, d.ty));
        self.values.insert(d.id, value & d.ty.mask());
        self.scopes().last_mut().expect("inside a scope").push(d.id);
    }

    fn store(&mut self, node: NodeId, var: VarId, ty: IntType, value: u64) {
        self.values.insert(var, value);
        if self.cfg.record_assignments {
            self.assignments.push(Assignment { node, var, value: ty.to_i128(value) });
        }
    }

    fn call(&mut self, f: &'a Function, args: Vec<u64>) -> Exec<Option<u64>> {
        self.frames.push(vec![Vec::new()]);
        self.rets.push(f.ret);
        for (param, arg) in f.params.iter().zip(args) {
            self.declare(param, arg);
        }
        let mut result = None;
        for s in &f.body {
            if let Flow::Return(v) = self.stmt(s)? {
                result = v;
                break;
            }
        }
        self.frames.pop();
        self.rets.pop();
        // falling off the end of a non-void function yields 0
        Ok(f.ret.map(|_| result.unwrap_or(0)))
    }

    fn block(&mut self, stmts: &'a [Stmt]) -> Exec<Flow> {
        self.scopes().push(Vec::new());
        let mut flow = Flow::Normal;
        for s in stmts {
            flow = self.stmt(s)?;
            if !matches!(flow, Flow::Normal) {
                break;
            }
        }
        self.scopes().pop();
        Ok(flow)
    }

    fn truthy(&mut self, e: &'a Expr) -> Exec<bool> {
        Ok(self.eval(e)? & e.ty.mask() != 0)
    }

    fn enter_loop(&mut self, id: NodeId) -> u32 {
        let a = self.activations.entry(id).or_insert(0);
        *a += 1;
        *a
    }

    fn snapshot(&mut self, loop_id: NodeId, activation: u32, visit: u32) {
        if !self.cfg.record_visits {
            return;
        }
        let vars: Vec<VarId> = match self.cfg.watch.get(&loop_id) {
            Some(vs) => vs.clone(),
            None => {
                let frame = self.frames.last().expect("inside a call frame");
                self.globals.iter().chain(frame.iter().flatten()).copied().collect()
            }
        };
        let state = vars
            .into_iter()
            .filter_map(|var| {
                let (name, ty) = *self.info.get(&var)?;
                let bits = *self.values.get(&var)?;
                Some(VarValue { var, name: name.to_string(), ty, value: ty.to_i128(bits) })
            })
            .collect();
        self.visits.push(HeaderVisit { loop_id, activation, visit, state });
    }

    fn stmt(&mut self, s: &'a Stmt) -> Exec<Flow> {
        self.tick()?;
        match &s.kind {
            StmtKind::Decl(d) => {
                let v = match &d.init {
                    Some(e) => ops::convert(self.eval(e)?, e.ty, d.ty),
                    None => 0,
                };
                self.declare(d, v);
            }
            StmtKind::Assign { target, op, value } => {
                let rhs = self.eval(value)?;
                let bits = match op {
                    None => ops::convert(rhs, value.ty, target.ty),
                    Some(op) => {
                        let op_ty = if op.is_shift() {
                            target.ty.promoted()
                        } else {
                            IntType::usual_arithmetic(target.ty, value.ty)
                        };
                        let cur = self.values[&target.id];
                        let a = ops::convert(cur, target.ty, op_ty);
                        let b = ops::convert(rhs, value.ty, op_ty);
                        let r = ops::binop(*op, op_ty, a, b).ok_or(RunStatus::Infeasible(s.meta.id))?;
                        ops::convert(r, op_ty, target.ty)
                    }
                };
                self.store(s.meta.id, target.id, target.ty, bits);
            }
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
            StmtKind::If { cond, then, els } => {
                if self.truthy(cond)? {
                    return self.stmt(then);
                } else if let Some(e) = els {
                    return self.stmt(e);
                }
            }
            StmtKind::While { cond, body } => {
                let act = self.enter_loop(s.meta.id);
                let mut visit = 0;
                loop {
                    self.tick()?;
                    if !self.truthy(cond)? {
                        break;
                    }
                    visit += 1;
                    self.snapshot(s.meta.id, act, visit);
                    match self.stmt(body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                }
            }
            StmtKind::DoWhile { body, cond } => {
                let act = self.enter_loop(s.meta.id);
                let mut visit = 0;
                loop {
                    visit += 1;
                    self.snapshot(s.meta.id, act, visit);
                    match self.stmt(body)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                    self.tick()?;
                    if !self.truthy(cond)? {
                        break;
                    }
                }
            }
            StmtKind::For { init, cond, update, body } => {
                self.scopes().push(Vec::new());
                let r = self.for_loop(s.meta.id, init, cond.as_ref(), update, body);
                self.scopes().pop();
                return r;
            }
            StmtKind::Break => return Ok(Flow::Break),
            StmtKind::Continue => return Ok(Flow::Continue),
            StmtKind::Return(v) => {
                let ret = *self.rets.last().expect("inside a call");
                let bits = match (v, ret) {
                    (Some(e), Some(rt)) => Some(ops::convert(self.eval(e)?, e.ty, rt)),
                    _ => None,
                };
                return Ok(Flow::Return(bits));
            }
            StmtKind::Block(items) => return self.block(items),
            StmtKind::Assert(e) => {
                if self.cfg.asserts == AssertMode::Stop && !self.truthy(e)? {
                    return Err(RunStatus::AssertionFailed(s.meta.id));
                }
            }
            StmtKind::Assume(e) => {
                if !self.truthy(e)? {
                    return Err(RunStatus::Infeasible(s.meta.id));
                }
            }
            StmtKind::Noop(_) => {}
        }
        Ok(Flow::Normal)
    }

    fn for_loop(
        &mut self,
        id: NodeId,
        init: &'a [Stmt],
        cond: Option<&'a Expr>,
        update: &'a [Stmt],
        body: &'a Stmt,
    ) -> Exec<Flow> {
        for s in init {
            self.stmt(s)?;
        }
        let act = self.enter_loop(id);
        let mut visit = 0;
        loop {
            self.tick()?;
            if let Some(c) = cond {
                if !self.truthy(c)? {
                    break;
                }
            }
            visit += 1;
            self.snapshot(id, act, visit);
            match self.stmt(body)? {
                Flow::Break => break,
                Flow::Return(v) => return Ok(Flow::Return(v)),
                Flow::Normal | Flow::Continue => {}
            }
            for s in update {
                self.stmt(s)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn eval(&mut self, e: &'a Expr) -> Exec<u64> {
        Ok(match &e.kind {
            ExprKind::Lit(v) => *v & e.ty.mask(),
            ExprKind::Var(v) => self.values[&v.id],
            ExprKind::Unary(op, inner) => {
                let v = self.eval(inner)?;
                match op {
                    UnOp::Not => ops::unop(UnOp::Not, inner.ty, v),
                    _ => ops::unop(*op, e.ty, ops::convert(v, inner.ty, e.ty)),
                }
            }
            ExprKind::Binary { op, lhs, rhs, .. } if op.is_logical() => {
                let l = self.truthy(lhs)?;
                let short = (*op == BinOp::LogOr) == l;
                let r = if short { l } else { self.truthy(rhs)? };
                r as u64
            }
            ExprKind::Binary { op, lhs, rhs, op_ty } => {
                let a = ops::convert(self.eval(lhs)?, lhs.ty, *op_ty);
                let b = ops::convert(self.eval(rhs)?, rhs.ty, *op_ty);
                ops::binop(*op, *op_ty, a, b).ok_or(RunStatus::Infeasible(e.meta.id))?
            }
            ExprKind::Cast(inner) => ops::convert(self.eval(inner)?, inner.ty, e.ty),
            ExprKind::Nondet(_) => {
                let v = self.inputs.next(e.ty, e.meta.id).ok_or(RunStatus::NondetExhausted)?;
                self.consumed += 1;
                v & e.ty.mask()
            }
            ExprKind::Call(name, args) => {
                let f = self.p.function(name).expect("calls are resolved");
                let mut vals = Vec::with_capacity(args.len());
                for (a, param) in args.iter().zip(&f.params) {
                    vals.push(ops::convert(self.eval(a)?, a.ty, param.ty));
                }
                let ret = self.call(f, vals)?;
                match (ret, f.ret) {
                    (Some(bits), Some(rt)) => ops::convert(bits, rt, e.ty),
                    _ => 0,
                }
            }
        })
    }
}
