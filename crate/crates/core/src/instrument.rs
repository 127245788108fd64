//! Recurrent-state instrumentation.
//!
//! Each loop `k` gets a guard `pStored<k>` and one shadow per state variable,
//! declared right before the loop. At the start of every iteration a fresh
//! nondet `flag<k>` decides whether to store the current state; once a state
//! is stored, every later iteration asserts that the state differs from it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::frontend::{
    BinOp, Expr, ExprKind, Function, IdGen, IntType, Loc, Meta, NodeId, Program, Stmt, StmtKind, UnOp, VarDecl, VarId,
    VarRef,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateVar {
    pub name: String,
    #[serde(skip)]
    pub id: VarId,
    #[serde(rename = "type")]
    pub ty: IntType,
}

impl StateVar {
    fn of(v: &VarRef) -> StateVar {
        StateVar { name: v.name.clone(), id: v.id, ty: v.ty }
    }

    fn var_ref(&self) -> VarRef {
        VarRef { name: self.name.clone(), id: self.id, ty: self.ty }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopSite {
    /// Pre-order index of the loop in the program.
    pub index: usize,
    pub loop_id: NodeId,
    /// Node of the loop condition, or the loop itself for `for(;;)`.
    pub header: NodeId,
    pub function: String,
    pub loc: Loc,
    pub state_vars: Vec<StateVar>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsiGadget {
    pub index: usize,
    pub loop_id: NodeId,
    pub pstored: VarRef,
    pub flag: VarRef,
    /// Node id of the `nondet_bool()` call that feeds `flag`.
    pub flag_site: NodeId,
    /// `(state variable, shadow)` pairs in state-var order.
    pub shadows: Vec<(VarRef, VarRef)>,
    pub assertion: NodeId,
    pub store: NodeId,
    pub marker: NodeId,
    /// Declarations inserted before the loop.
    pub pre_loop: Vec<NodeId>,
    /// Statements inserted at the start of the loop body.
    pub in_body: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstrumentedProgram {
    pub program: Program,
    pub sites: Vec<LoopSite>,
    pub gadgets: BTreeMap<NodeId, RsiGadget>,
    /// User assertions replaced by markers, keyed by statement id.
    pub disabled_asserts: BTreeMap<NodeId, Expr>,
}

impl InstrumentedProgram {
    pub fn site(&self, loop_id: NodeId) -> Option<&LoopSite> {
        self.sites.iter().find(|s| s.loop_id == loop_id)
    }

    pub fn gadget_for_assertion(&self, assertion: NodeId) -> Option<&RsiGadget> {
        self.gadgets.values().find(|g| g.assertion == assertion)
    }

    pub fn flag_sites(&self) -> HashSet<NodeId> {
        self.gadgets.values().map(|g| g.flag_site).collect()
    }

    /// Variables introduced by instrumentation.
    pub fn gadget_vars(&self) -> HashSet<VarId> {
        let mut out = HashSet::new();
        for g in self.gadgets.values() {
            out.insert(g.pstored.id);
            out.insert(g.flag.id);
            out.extend(g.shadows.iter().map(|(_, s)| s.id));
        }
        out
    }
}

/// In-scope variables at each loop header, paired with their scope depth.
fn header_scopes(p: &Program) -> HashMap<NodeId, Vec<(usize, VarRef)>> {
    fn stmts(list: &[Stmt], depth: usize, stack: &mut Vec<(usize, VarRef)>, out: &mut HashMap<NodeId, Vec<(usize, VarRef)>>) {
        for s in list {
            stmt(s, depth, stack, out);
        }
    }

    fn stmt(s: &Stmt, depth: usize, stack: &mut Vec<(usize, VarRef)>, out: &mut HashMap<NodeId, Vec<(usize, VarRef)>>) {
        let mark = stack.len();
        match &s.kind {
            StmtKind::Decl(d) => stack.push((depth, d.var_ref())),
            StmtKind::Block(items) => {
                stmts(items, depth + 1, stack, out);
                stack.truncate(mark);
            }
            StmtKind::If { then, els, .. } => {
                stmt(then, depth, stack, out);
                stack.truncate(mark);
                if let Some(e) = els {
                    stmt(e, depth, stack, out);
                    stack.truncate(mark);
                }
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => {
                out.insert(s.meta.id, stack.clone());
                stmt(body, depth, stack, out);
                stack.truncate(mark);
            }
            StmtKind::For { init, body, .. } => {
                stmts(init, depth + 1, stack, out);
                out.insert(s.meta.id, stack.clone());
                stmt(body, depth + 1, stack, out);
                stack.truncate(mark);
            }
            _ => {}
        }
    }

    let globals: Vec<(usize, VarRef)> = p.globals.iter().map(|g| (0, g.var_ref())).collect();
    let mut out = HashMap::new();
    for f in &p.functions {
        let mut stack = globals.clone();
        stack.extend(f.params.iter().map(|d| (1, d.var_ref())));
        stmts(&f.body, 1, &mut stack, &mut out);
    }
    out
}

/// Variables referenced anywhere in a function or its callees.
fn function_refs(p: &Program, name: &str, memo: &mut HashMap<String, BTreeSet<VarId>>) -> BTreeSet<VarId> {
    if let Some(r) = memo.get(name) {
        return r.clone();
    }
    let mut refs = BTreeSet::new();
    if let Some(f) = p.function(name) {
        for s in &f.body {
            stmt_refs(p, s, &mut refs, memo);
        }
    }
    memo.insert(name.to_string(), refs.clone());
    refs
}

fn expr_refs(p: &Program, e: &Expr, refs: &mut BTreeSet<VarId>, memo: &mut HashMap<String, BTreeSet<VarId>>) {
    let mut callees = Vec::new();
    e.walk(&mut |x| match &x.kind {
        ExprKind::Var(v) => {
            refs.insert(v.id);
        }
        ExprKind::Call(name, _) => callees.push(name.clone()),
        _ => {}
    });
    for c in callees {
        refs.extend(function_refs(p, &c, memo));
    }
}

fn stmt_refs(p: &Program, s: &Stmt, refs: &mut BTreeSet<VarId>, memo: &mut HashMap<String, BTreeSet<VarId>>) {
    s.walk(&mut |x| {
        if let StmtKind::Assign { target, .. } = &x.kind {
            refs.insert(target.id);
        }
    });
    let mut exprs = Vec::new();
    s.walk(&mut |x| x.own_exprs(&mut |e| exprs.push(e)));
    for e in exprs {
        expr_refs(p, e, refs, memo);
    }
}

/// Variables referenced by the loop's condition, update or body.
fn loop_refs(p: &Program, s: &Stmt, memo: &mut HashMap<String, BTreeSet<VarId>>) -> BTreeSet<VarId> {
    let mut refs = BTreeSet::new();
    match &s.kind {
        StmtKind::While { cond, body } | StmtKind::DoWhile { body, cond } => {
            expr_refs(p, cond, &mut refs, memo);
            stmt_refs(p, body, &mut refs, memo);
        }
        StmtKind::For { cond, update, body, .. } => {
            if let Some(c) = cond {
                expr_refs(p, c, &mut refs, memo);
            }
            for u in update {
                stmt_refs(p, u, &mut refs, memo);
            }
            stmt_refs(p, body, &mut refs, memo);
        }
        _ => {}
    }
    refs
}

fn state_vars_with(p: &Program, s: &Stmt, scopes: &HashMap<NodeId, Vec<(usize, VarRef)>>, memo: &mut HashMap<String, BTreeSet<VarId>>) -> Vec<StateVar> {
    let refs = loop_refs(p, s, memo);
    let mut vars: Vec<(usize, VarRef)> = scopes
        .get(&s.meta.id)
        .map(|v| v.iter().filter(|(_, r)| refs.contains(&r.id)).cloned().collect())
        .unwrap_or_default();
    vars.sort_by_key(|(depth, r)| (*depth, r.id));
    vars.iter().map(|(_, r)| StateVar::of(r)).collect()
}

/// Scalars in scope at the loop header that the loop reads or writes,
/// ordered by scope depth and then declaration order.
pub fn collect_state_vars(p: &Program, loop_id: NodeId) -> Vec<StateVar> {
    let scopes = header_scopes(p);
    let mut memo = HashMap::new();
    match p.find_stmt(loop_id) {
        Some((_, s)) if s.is_loop() => state_vars_with(p, s, &scopes, &mut memo),
        _ => Vec::new(),
    }
}

/// Loop sites in pre-order.
pub fn loop_sites(p: &Program) -> Vec<LoopSite> {
    let scopes = header_scopes(p);
    let mut memo = HashMap::new();
    p.loops()
        .into_iter()
        .enumerate()
        .map(|(index, (f, s)): (usize, (&Function, &Stmt))| {
            let header = match &s.kind {
                StmtKind::While { cond, .. } | StmtKind::DoWhile { cond, .. } => cond.meta.id,
                StmtKind::For { cond: Some(c), .. } => c.meta.id,
                _ => s.meta.id,
            };
            LoopSite {
                index,
                loop_id: s.meta.id,
                header,
                function: f.name.clone(),
                loc: s.meta.loc,
                state_vars: state_vars_with(p, s, &scopes, &mut memo),
            }
        })
        .collect()
}

fn all_names(p: &Program) -> HashSet<String> {
    let mut names: HashSet<String> = p.globals.iter().map(|g| g.name.clone()).collect();
    for f in &p.functions {
        names.insert(f.name.clone());
        names.extend(f.params.iter().map(|d| d.name.clone()));
    }
    p.walk(&mut |_, s| {
        if let StmtKind::Decl(d) = &s.kind {
            names.insert(d.name.clone());
        }
    });
    names
}

struct Builder {
    ids: IdGen,
    taken: HashSet<String>,
    loc: Loc,
}

impl Builder {
    fn meta(&mut self) -> Meta {
        self.ids.meta(self.loc)
    }

    fn fresh(&mut self, base: String, k: usize) -> String {
        let mut name = base.clone();
        let mut n = 1;
        while self.taken.contains(&name) {
            name = if n == 1 { format!("{base}_{k}") } else { format!("{base}_{k}_{n}") };
            n += 1;
        }
        self.taken.insert(name.clone());
        name
    }

    fn decl(&mut self, name: String, ty: IntType, init: Expr) -> (Stmt, VarRef) {
        let d = VarDecl { meta: self.meta(), name, id: self.ids.var(), ty, init: Some(init) };
        let r = d.var_ref();
        (Stmt::new(self.meta(), StmtKind::Decl(d)), r)
    }

    fn lit(&mut self, v: u64) -> Expr {
        Expr::lit(self.meta(), IntType::I32, v)
    }

    fn var(&mut self, v: &VarRef) -> Expr {
        Expr::var(self.meta(), v.clone())
    }

    fn binary(&mut self, op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        let op_ty = if op.is_logical() { IntType::I32 } else { IntType::usual_arithmetic(lhs.ty, rhs.ty) };
        let ty = if op.is_logical() || op.is_comparison() { IntType::I32 } else { op_ty };
        Expr { meta: self.meta(), ty, kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), op_ty } }
    }

    fn not(&mut self, e: Expr) -> Expr {
        Expr { meta: self.meta(), ty: IntType::I32, kind: ExprKind::Unary(UnOp::Not, Box::new(e)) }
    }

    fn assign(&mut self, target: &VarRef, value: Expr) -> Stmt {
        Stmt::new(self.meta(), StmtKind::Assign { target: target.clone(), op: None, value })
    }

    fn block(&mut self, items: Vec<Stmt>) -> Box<Stmt> {
        Box::new(Stmt::new(self.meta(), StmtKind::Block(items)))
    }

    /// Build the gadget for one loop: (statements before the loop, statements
    /// at the start of its body, record).
    fn gadget(&mut self, site: &LoopSite) -> (Vec<Stmt>, Vec<Stmt>, RsiGadget) {
        let k = site.index;
        self.loc = site.loc;
        let zero = self.lit(0);
        let name = self.fresh(format!("pStored{k}"), k);
        let (pstored_decl, pstored) = self.decl(name, IntType::BOOL, zero);
        let mut pre = vec![pstored_decl];
        let mut shadows = Vec::new();
        for v in &site.state_vars {
            let zero = self.lit(0);
            let name = self.fresh(format!("o{}", v.name), k);
            let (d, shadow) = self.decl(name, v.ty, zero);
            pre.push(d);
            shadows.push((v.var_ref(), shadow));
        }

        let marker = Stmt::new(self.meta(), StmtKind::Noop(format!("RSI loop {k}")));
        let flag_site = self.meta();
        let nondet = Expr { meta: flag_site, ty: IntType::BOOL, kind: ExprKind::Nondet("nondet_bool".into()) };
        let name = self.fresh(format!("flag{k}"), k);
        let (flag_decl, flag) = self.decl(name, IntType::BOOL, nondet);

        let mut conj: Option<Expr> = None;
        for (v, o) in &shadows {
            let (lhs, rhs) = (self.var(o), self.var(v));
            let eq = self.binary(BinOp::Eq, lhs, rhs);
            conj = Some(match conj {
                None => eq,
                Some(c) => self.binary(BinOp::LogAnd, c, eq),
            });
        }
        let conj = conj.unwrap_or_else(|| self.lit(1));
        let cond = self.not(conj);
        let assertion = Stmt::new(self.meta(), StmtKind::Assert(cond));
        let assertion_id = assertion.meta.id;
        let then = self.block(vec![assertion]);
        let check_cond = self.var(&pstored);
        let check = Stmt::new(self.meta(), StmtKind::If { cond: check_cond, then, els: None });

        let mut copies: Vec<Stmt> = Vec::new();
        for (v, o) in &shadows {
            let value = self.var(v);
            copies.push(self.assign(o, value));
        }
        let one = self.lit(1);
        copies.push(self.assign(&pstored, one));
        let flag_e = self.var(&flag);
        let stored_e = self.var(&pstored);
        let not_stored = self.not(stored_e);
        let store_cond = self.binary(BinOp::LogAnd, flag_e, not_stored);
        let then = self.block(copies);
        let store = Stmt::new(self.meta(), StmtKind::If { cond: store_cond, then, els: None });

        let in_body = vec![marker, flag_decl, check, store];
        let g = RsiGadget {
            index: k,
            loop_id: site.loop_id,
            pstored,
            flag,
            flag_site: flag_site.id,
            shadows,
            assertion: assertion_id,
            store: in_body[3].meta.id,
            marker: in_body[0].meta.id,
            pre_loop: pre.iter().map(|s| s.meta.id).collect(),
            in_body: in_body.iter().map(|s| s.meta.id).collect(),
        };
        (pre, in_body, g)
    }
}

struct Rewriter<'a> {
    b: Builder,
    sites: &'a HashMap<NodeId, &'a LoopSite>,
    gadgets: BTreeMap<NodeId, RsiGadget>,
    disabled: BTreeMap<NodeId, Expr>,
}

impl Rewriter<'_> {
    fn list(&mut self, stmts: Vec<Stmt>) -> Vec<Stmt> {
        let mut out = Vec::with_capacity(stmts.len());
        for s in stmts {
            if let Some(site) = self.sites.get(&s.meta.id).copied() {
                // outer gadget first so fresh names and ids follow pre-order
                let (pre, in_body, g) = self.b.gadget(site);
                self.gadgets.insert(site.loop_id, g);
                out.extend(pre);
                let mut looped = self.stmt(s);
                prepend_to_body(&mut looped, in_body);
                out.push(looped);
            } else {
                out.push(self.stmt(s));
            }
        }
        out
    }

    fn boxed(&mut self, s: Box<Stmt>) -> Box<Stmt> {
        Box::new(self.stmt(*s))
    }

    fn stmt(&mut self, s: Stmt) -> Stmt {
        let Stmt { meta, kind } = s;
        let kind = match kind {
            StmtKind::Assert(e) => {
                let label = format!("assert disabled: {}", crate::normalize::expr(&e).replace('"', "'"));
                self.disabled.insert(meta.id, e);
                StmtKind::Noop(label)
            }
            StmtKind::If { cond, then, els } => {
                StmtKind::If { cond, then: self.boxed(then), els: els.map(|e| self.boxed(e)) }
            }
            StmtKind::While { cond, body } => StmtKind::While { cond, body: self.boxed(body) },
            StmtKind::DoWhile { body, cond } => StmtKind::DoWhile { body: self.boxed(body), cond },
            StmtKind::For { init, cond, update, body } => StmtKind::For { init, cond, update, body: self.boxed(body) },
            StmtKind::Block(items) => StmtKind::Block(self.list(items)),
            other => other,
        };
        Stmt { meta, kind }
    }
}

fn prepend_to_body(s: &mut Stmt, gadget: Vec<Stmt>) {
    let body = match &mut s.kind {
        StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } | StmtKind::For { body, .. } => body,
        _ => unreachable!("gadgets attach to loops"),
    };
    match &mut body.kind {
        StmtKind::Block(items) => {
            items.splice(0..0, gadget);
        }
        _ => unreachable!("insert_rsi requires a braced program"),
    }
}

/// Insert one gadget per loop and disable user assertions. `p` must be braced.
pub fn insert_rsi(p: Program) -> InstrumentedProgram {
    assert!(crate::normalize::is_braced(&p), "insert_rsi requires a braced program");
    let sites = loop_sites(&p);
    let by_id: HashMap<NodeId, &LoopSite> = sites.iter().map(|s| (s.loop_id, s)).collect();
    let mut rw = Rewriter {
        b: Builder { ids: p.ids, taken: all_names(&p), loc: Loc::default() },
        sites: &by_id,
        gadgets: BTreeMap::new(),
        disabled: BTreeMap::new(),
    };
    let Program { globals, functions, entry, .. } = p;
    let functions = functions
        .into_iter()
        .map(|mut f| {
            f.body = rw.list(std::mem::take(&mut f.body));
            f
        })
        .collect();
    let program = Program { globals, functions, entry, ids: rw.b.ids };
    InstrumentedProgram { program, sites: sites.clone(), gadgets: rw.gadgets, disabled_asserts: rw.disabled }
}

/// Brace and instrument in one step.
pub fn instrument(p: Program) -> InstrumentedProgram {
    insert_rsi(crate::normalize::brace(p))
}

/// Remove every gadget statement and restore disabled assertions.
pub fn strip_gadgets(ip: &InstrumentedProgram) -> Program {
    let gadget_stmts: HashSet<NodeId> = ip
        .gadgets
        .values()
        .flat_map(|g| g.pre_loop.iter().chain(&g.in_body).copied())
        .collect();

    fn strip(s: &mut Stmt, drop: &HashSet<NodeId>, restore: &BTreeMap<NodeId, Expr>) {
        if let Some(e) = restore.get(&s.meta.id) {
            s.kind = StmtKind::Assert(e.clone());
        }
        match &mut s.kind {
            StmtKind::Block(items) => {
                items.retain(|x| !drop.contains(&x.meta.id));
                items.iter_mut().for_each(|x| strip(x, drop, restore));
            }
            StmtKind::If { then, els, .. } => {
                strip(then, drop, restore);
                if let Some(e) = els {
                    strip(e, drop, restore);
                }
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } | StmtKind::For { body, .. } => {
                strip(body, drop, restore)
            }
            _ => {}
        }
    }

    let mut p = ip.program.clone();
    for f in &mut p.functions {
        f.body.retain(|x| !gadget_stmts.contains(&x.meta.id));
        f.body.iter_mut().for_each(|s| strip(s, &gadget_stmts, &ip.disabled_asserts));
    }
    p
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::interp::{run, RunConfig, SequenceSource};
    use crate::normalize::{brace, unparse};

    pub const LISTING1: &str = "void complexFunction(void) { printf(\"complex\"); }
int main(void) {
    int callVal = nondet_int();
    if (callVal > 0) { complexFunction(); }
    else { int i = 0; for (i = 0; i < 10 && callVal <= 0; i++) { if (i == 2) { i = -1; } } }
    return callVal;
}
";

    fn names(vs: &[StateVar]) -> Vec<&str> {
        vs.iter().map(|v| v.name.as_str()).collect()
    }

    #[test]
    fn listing_state_vars() {
        let p = parse(LISTING1).unwrap();
        let sites = loop_sites(&p);
        assert_eq!(sites.len(), 1);
        assert_eq!(names(&sites[0].state_vars), vec!["callVal", "i"]);
        assert_eq!(names(&collect_state_vars(&p, sites[0].loop_id)), vec!["callVal", "i"]);
    }

    #[test]
    fn empty_loop_has_no_state() {
        let p = parse("int main(){ while(1); return 0; }").unwrap();
        assert!(loop_sites(&p)[0].state_vars.is_empty());
        let ip = instrument(p);
        assert!(unparse(&ip.program).contains("__VERIFIER_assert(!1);"), "{}", unparse(&ip.program));
    }

    #[test]
    fn unrelated_locals_excluded_and_callee_globals_included() {
        let src = "int g; int bump(void){ g = g + 1; return g; } int main(){ int y = 3; int x = 0; int z = 0; while (x < 5) { x = bump(); } return y; }";
        let p = parse(src).unwrap();
        assert_eq!(names(&loop_sites(&p)[0].state_vars), vec!["g", "x"]);
    }

    #[test]
    fn body_locals_are_not_state() {
        let p = parse("int main(){ int n = 0; while (n < 3) { int t = n; n = t + 1; } return n; }").unwrap();
        assert_eq!(names(&loop_sites(&p)[0].state_vars), vec!["n"]);
    }

    #[test]
    fn gadget_layout_matches_listing() {
        let ip = instrument(parse(LISTING1).unwrap());
        let text = unparse(&ip.program);
        for needle in [
            "_Bool pStored0 = 0;",
            "int ocallVal = 0;",
            "int oi = 0;",
            "printf(\"RSI loop 0\");",
            "_Bool flag0 = nondet_bool();",
            "if (pStored0) {",
            "__VERIFIER_assert(!(ocallVal == callVal && oi == i));",
            "if (flag0 && !pStored0) {",
            "ocallVal = callVal;",
            "oi = i;",
            "pStored0 = 1;",
        ] {
            assert!(text.contains(needle), "missing `{needle}` in\n{text}");
        }
        let check = text.find("if (pStored0)").unwrap();
        let store = text.find("if (flag0").unwrap();
        assert!(check < store, "assertion must precede store");
    }

    #[test]
    fn loop_free_program_has_no_sites() {
        let ip = instrument(parse("int main(){ int x = 1; return x; }").unwrap());
        assert!(ip.sites.is_empty() && ip.gadgets.is_empty());
    }

    #[test]
    fn shadow_names_avoid_collisions() {
        let src = "int main(){ int i = 0; int oi = 5; int pStored0 = 0; while (i < oi + pStored0) { i++; } return 0; }";
        let ip = instrument(parse(src).unwrap());
        let g = &ip.gadgets.values().next().unwrap();
        assert_eq!(g.pstored.name, "pStored0_0");
        let shadow_names: Vec<&str> = g.shadows.iter().map(|(_, s)| s.name.as_str()).collect();
        assert_eq!(shadow_names, vec!["oi_0", "ooi", "opStored0"]);
        parse(&unparse(&ip.program)).unwrap();
    }

    #[test]
    fn strip_restores_braced_original() {
        let src = "int main(){ int a = nondet_int(); assert(a != 3); while (a > 0) { a--; for (int j = 0; j < a; j++) { assert(j >= 0); } } return 0; }";
        let p = parse(src).unwrap();
        let ip = instrument(p.clone());
        assert_eq!(ip.disabled_asserts.len(), 2);
        assert_eq!(strip_gadgets(&ip), brace(p));
    }

    #[test]
    fn instrumented_text_reparses() {
        let ip = instrument(parse(LISTING1).unwrap());
        let text = unparse(&ip.program);
        let q = parse(&text).unwrap();
        assert_eq!(unparse(&q), text);
        assert_eq!(loop_sites(&q).len(), 1);
    }

    #[test]
    fn nested_inner_guard_resets_per_entry() {
        let src = "int main(){ int a = 0; while (a < 2) { int b = 0; while (b < 2) { b++; } a++; } return 0; }";
        let ip = instrument(parse(src).unwrap());
        let inner = ip.gadgets.values().find(|g| g.index == 1).unwrap().clone();
        // flags always true: the inner store fires once per entry of the inner loop
        let mut src = |_t: IntType, _site: NodeId| Some(1u64);
        let cfg = RunConfig { record_assignments: true, ..RunConfig::default() };
        let log = run(&ip.program, &mut src, &cfg);
        let stores: Vec<i128> = log.assignments.iter().filter(|a| a.var == inner.pstored.id).map(|a| a.value).collect();
        assert_eq!(stores, vec![1, 1], "one store per inner activation");
    }

    #[test]
    fn flags_false_never_arms_assertion() {
        let ip = instrument(parse(LISTING1).unwrap());
        let mut src = SequenceSource::new(vec![crate::interp::NondetValue::new(IntType::I32, -4)]);
        src.forced_false = ip.flag_sites();
        let cfg = RunConfig { step_limit: 10_000, asserts: crate::interp::AssertMode::Stop, ..RunConfig::default() };
        let log = run(&ip.program, &mut src, &cfg);
        assert_eq!(log.status, crate::interp::RunStatus::StepLimit);
    }
}
