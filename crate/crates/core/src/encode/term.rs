//! Hash-consed bit-vector terms with constant folding and local rewrites.
//!
//! Every term's operands have smaller ids than the term itself, so evaluating
//! in ascending id order is a valid topological order.

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Const(u64),
    Sym(SymId),
    Not(TermId),
    And(TermId, TermId),
    Or(TermId, TermId),
    Xor(TermId, TermId),
    Neg(TermId),
    Add(TermId, TermId),
    Sub(TermId, TermId),
    Mul(TermId, TermId),
    UDiv(TermId, TermId),
    URem(TermId, TermId),
    SDiv(TermId, TermId),
    SRem(TermId, TermId),
    Shl(TermId, TermId),
    LShr(TermId, TermId),
    AShr(TermId, TermId),
    Eq(TermId, TermId),
    Ult(TermId, TermId),
    Ule(TermId, TermId),
    Slt(TermId, TermId),
    Sle(TermId, TermId),
    Ite(TermId, TermId, TermId),
    ZExt(TermId),
    SExt(TermId),
    /// Bits `hi..=lo` of the operand.
    Extract(TermId, u8, u8),
}

impl Op {
    pub fn operands(&self) -> Vec<TermId> {
        use Op::*;
        match *self {
            Const(_) | Sym(_) => vec![],
            Not(a) | Neg(a) | ZExt(a) | SExt(a) | Extract(a, _, _) => vec![a],
            And(a, b) | Or(a, b) | Xor(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | UDiv(a, b) | URem(a, b)
            | SDiv(a, b) | SRem(a, b) | Shl(a, b) | LShr(a, b) | AShr(a, b) | Eq(a, b) | Ult(a, b) | Ule(a, b)
            | Slt(a, b) | Sle(a, b) => vec![a, b],
            Ite(c, t, e) => vec![c, t, e],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Node {
    pub op: Op,
    pub width: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymInfo {
    pub name: String,
    pub width: u8,
    pub signed: bool,
}

pub fn mask(width: u8) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn sext(v: u64, width: u8) -> i64 {
    if width >= 64 {
        v as i64
    } else {
        let shift = 64 - width as u32;
        ((v << shift) as i64) >> shift
    }
}

/// Evaluate one operator on concrete operand values (SMT-LIB bit-vector semantics).
pub fn eval_op(op: &Op, width: u8, child_width: u8, args: &[u64]) -> u64 {
    use Op::*;
    let m = mask(width);
    let cm = mask(child_width);
    let a = args.first().copied().unwrap_or(0);
    let b = args.get(1).copied().unwrap_or(0);
    let bit = |c: bool| c as u64;
    match *op {
        Const(v) => v & m,
        Sym(_) => unreachable!("symbols are evaluated from the model"),
        Not(_) => !a & m,
        And(..) => a & b,
        Or(..) => a | b,
        Xor(..) => a ^ b,
        Neg(_) => a.wrapping_neg() & m,
        Add(..) => a.wrapping_add(b) & m,
        Sub(..) => a.wrapping_sub(b) & m,
        Mul(..) => a.wrapping_mul(b) & m,
        UDiv(..) => {
            if b == 0 {
                m
            } else {
                a / b
            }
        }
        URem(..) => {
            if b == 0 {
                a
            } else {
                a % b
            }
        }
        SDiv(..) => {
            let (x, y) = (sext(a, width), sext(b, width));
            if y == 0 {
                if x < 0 {
                    1
                } else {
                    m
                }
            } else {
                (x.wrapping_div(y) as u64) & m
            }
        }
        SRem(..) => {
            let (x, y) = (sext(a, width), sext(b, width));
            if y == 0 {
                a
            } else {
                (x.wrapping_rem(y) as u64) & m
            }
        }
        Shl(..) => {
            if b >= width as u64 {
                0
            } else {
                (a << b) & m
            }
        }
        LShr(..) => {
            if b >= width as u64 {
                0
            } else {
                a >> b
            }
        }
        AShr(..) => {
            let s = sext(a, width);
            let amount = b.min(63);
            ((s >> amount) as u64) & m
        }
        Eq(..) => bit(a == b),
        Ult(..) => bit(a < b),
        Ule(..) => bit(a <= b),
        Slt(..) => bit(sext(a, child_width) < sext(b, child_width)),
        Sle(..) => bit(sext(a, child_width) <= sext(b, child_width)),
        Ite(..) => {
            if a & 1 == 1 {
                b
            } else {
                args[2]
            }
        }
        ZExt(_) => a & cm,
        SExt(_) => (sext(a, child_width) as u64) & m,
        Extract(_, _, lo) => (a >> lo) & m,
    }
}

/// Store of all terms built for one encoding.
#[derive(Debug, Default, Clone)]
pub struct TermStore {
    nodes: Vec<Node>,
    index: HashMap<Node, TermId>,
    syms: Vec<SymInfo>,
}

impl TermStore {
    pub fn new() -> TermStore {
        TermStore::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, t: TermId) -> Node {
        self.nodes[t.0 as usize]
    }

    pub fn width(&self, t: TermId) -> u8 {
        self.nodes[t.0 as usize].width
    }

    pub fn syms(&self) -> &[SymInfo] {
        &self.syms
    }

    pub fn sym_info(&self, s: SymId) -> &SymInfo {
        &self.syms[s.0 as usize]
    }

    pub fn as_const(&self, t: TermId) -> Option<u64> {
        match self.node(t).op {
            Op::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_true(&self, t: TermId) -> bool {
        self.width(t) == 1 && self.as_const(t) == Some(1)
    }

    pub fn is_false(&self, t: TermId) -> bool {
        self.width(t) == 1 && self.as_const(t) == Some(0)
    }

    fn intern(&mut self, op: Op, width: u8) -> TermId {
        let node = Node { op, width };
        if let Some(&t) = self.index.get(&node) {
            return t;
        }
        let t = TermId(self.nodes.len() as u32);
        self.nodes.push(node);
        self.index.insert(node, t);
        t
    }

    /// Intern `op`, folding it when every operand is constant.
    fn build(&mut self, op: Op, width: u8) -> TermId {
        let ops = op.operands();
        if !ops.is_empty() {
            let consts: Option<Vec<u64>> = ops.iter().map(|&o| self.as_const(o)).collect();
            if let Some(vals) = consts {
                let cw = self.width(ops[0]);
                let v = eval_op(&op, width, cw, &vals);
                return self.constant(width, v);
            }
        }
        self.intern(op, width)
    }

    pub fn constant(&mut self, width: u8, v: u64) -> TermId {
        self.intern(Op::Const(v & mask(width)), width)
    }

    pub fn tt(&mut self) -> TermId {
        self.constant(1, 1)
    }

    pub fn ff(&mut self) -> TermId {
        self.constant(1, 0)
    }

    pub fn bool_const(&mut self, b: bool) -> TermId {
        self.constant(1, b as u64)
    }

    pub fn sym(&mut self, name: impl Into<String>, width: u8, signed: bool) -> (SymId, TermId) {
        let id = SymId(self.syms.len() as u32);
        self.syms.push(SymInfo { name: name.into(), width, signed });
        (id, self.intern(Op::Sym(id), width))
    }

    pub fn not(&mut self, a: TermId) -> TermId {
        let w = self.width(a);
        if let Op::Not(x) = self.node(a).op {
            return x;
        }
        self.build(Op::Not(a), w)
    }

    fn is_complement(&self, a: TermId, b: TermId) -> bool {
        matches!(self.node(a).op, Op::Not(x) if x == b) || matches!(self.node(b).op, Op::Not(x) if x == a)
    }

    pub fn and(&mut self, a: TermId, b: TermId) -> TermId {
        let w = self.width(a);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let m = mask(w);
        match (self.as_const(a), self.as_const(b)) {
            (Some(0), _) | (_, Some(0)) => return self.constant(w, 0),
            (Some(x), _) if x == m => return b,
            (_, Some(y)) if y == m => return a,
            _ => {}
        }
        if a == b {
            return a;
        }
        if self.is_complement(a, b) {
            return self.constant(w, 0);
        }
        self.build(Op::And(a, b), w)
    }

    pub fn or(&mut self, a: TermId, b: TermId) -> TermId {
        let w = self.width(a);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let m = mask(w);
        match (self.as_const(a), self.as_const(b)) {
            (Some(x), _) if x == m => return self.constant(w, m),
            (_, Some(y)) if y == m => return self.constant(w, m),
            (Some(0), _) => return b,
            (_, Some(0)) => return a,
            _ => {}
        }
        if a == b {
            return a;
        }
        if self.is_complement(a, b) {
            return self.constant(w, m);
        }
        // (g & c) | (g & !c) == g
        if let (Op::And(a1, a2), Op::And(b1, b2)) = (self.node(a).op, self.node(b).op) {
            for (sa, oa) in [(a1, a2), (a2, a1)] {
                for (sb, ob) in [(b1, b2), (b2, b1)] {
                    if sa == sb && self.is_complement(oa, ob) {
                        return sa;
                    }
                }
            }
        }
        self.build(Op::Or(a, b), w)
    }

    pub fn xor(&mut self, a: TermId, b: TermId) -> TermId {
        let w = self.width(a);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == b {
            return self.constant(w, 0);
        }
        if self.as_const(a) == Some(0) {
            return b;
        }
        if self.as_const(b) == Some(0) {
            return a;
        }
        self.build(Op::Xor(a, b), w)
    }

    pub fn implies(&mut self, a: TermId, b: TermId) -> TermId {
        let na = self.not(a);
        self.or(na, b)
    }

    pub fn neg(&mut self, a: TermId) -> TermId {
        let w = self.width(a);
        self.build(Op::Neg(a), w)
    }

    pub fn add(&mut self, a: TermId, b: TermId) -> TermId {
        let w = self.width(a);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if self.as_const(a) == Some(0) {
            return b;
        }
        if self.as_const(b) == Some(0) {
            return a;
        }
        self.build(Op::Add(a, b), w)
    }

    pub fn sub(&mut self, a: TermId, b: TermId) -> TermId {
        let w = self.width(a);
        if a == b {
            return self.constant(w, 0);
        }
        if self.as_const(b) == Some(0) {
            return a;
        }
        self.build(Op::Sub(a, b), w)
    }

    pub fn mul(&mut self, a: TermId, b: TermId) -> TermId {
        let w = self.width(a);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        match (self.as_const(a), self.as_const(b)) {
            (Some(0), _) | (_, Some(0)) => return self.constant(w, 0),
            (Some(1), _) => return b,
            (_, Some(1)) => return a,
            _ => {}
        }
        self.build(Op::Mul(a, b), w)
    }

    pub fn binary(&mut self, op: fn(TermId, TermId) -> Op, a: TermId, b: TermId) -> TermId {
        let w = self.width(a);
        self.build(op(a, b), w)
    }

    pub fn udiv(&mut self, a: TermId, b: TermId) -> TermId {
        self.binary(Op::UDiv, a, b)
    }

    pub fn urem(&mut self, a: TermId, b: TermId) -> TermId {
        self.binary(Op::URem, a, b)
    }

    pub fn sdiv(&mut self, a: TermId, b: TermId) -> TermId {
        self.binary(Op::SDiv, a, b)
    }

    pub fn srem(&mut self, a: TermId, b: TermId) -> TermId {
        self.binary(Op::SRem, a, b)
    }

    pub fn shl(&mut self, a: TermId, b: TermId) -> TermId {
        if self.as_const(b) == Some(0) {
            return a;
        }
        self.binary(Op::Shl, a, b)
    }

    pub fn lshr(&mut self, a: TermId, b: TermId) -> TermId {
        if self.as_const(b) == Some(0) {
            return a;
        }
        self.binary(Op::LShr, a, b)
    }

    pub fn ashr(&mut self, a: TermId, b: TermId) -> TermId {
        if self.as_const(b) == Some(0) {
            return a;
        }
        self.binary(Op::AShr, a, b)
    }

    pub fn eq(&mut self, a: TermId, b: TermId) -> TermId {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == b {
            return self.tt();
        }
        if self.width(a) == 1 {
            // boolean equality is xnor; prefer the simpler forms
            match (self.as_const(a), self.as_const(b)) {
                (Some(1), _) => return b,
                (_, Some(1)) => return a,
                (Some(0), _) => return self.not(b),
                (_, Some(0)) => return self.not(a),
                _ => {}
            }
        }
        if let Some(r) = self.eq_pushdown(a, b, 0) {
            return r;
        }
        self.build(Op::Eq(a, b), 1)
    }

    /// Rewrite `ite(c, k1, k2) == k` and `zext(b) == k` into boolean structure.
    fn eq_pushdown(&mut self, a: TermId, b: TermId, depth: u32) -> Option<TermId> {
        let (x, k) = match (self.as_const(a), self.as_const(b)) {
            (None, Some(k)) => (a, k),
            (Some(k), None) => (b, k),
            _ => return None,
        };
        match self.node(x).op {
            Op::ZExt(inner) => {
                let iw = self.width(inner);
                if k & !mask(iw) != 0 {
                    return Some(self.ff());
                }
                let kk = self.constant(iw, k);
                Some(self.eq(inner, kk))
            }
            Op::Ite(c, t, e) if depth < 64 && self.const_leaves(t, 8) && self.const_leaves(e, 8) => {
                let kt = self.constant(self.width(x), k);
                let et = match self.eq_pushdown(t, kt, depth + 1) {
                    Some(r) => r,
                    None => self.eq(t, kt),
                };
                let ee = match self.eq_pushdown(e, kt, depth + 1) {
                    Some(r) => r,
                    None => self.eq(e, kt),
                };
                Some(self.ite(c, et, ee))
            }
            _ => None,
        }
    }

    /// True when `t` is a constant or an `ite` tree (of bounded depth) over constants.
    fn const_leaves(&self, t: TermId, budget: u32) -> bool {
        match self.node(t).op {
            Op::Const(_) => true,
            Op::Ite(_, a, b) if budget > 0 => self.const_leaves(a, budget - 1) && self.const_leaves(b, budget - 1),
            _ => false,
        }
    }

    pub fn ne(&mut self, a: TermId, b: TermId) -> TermId {
        let e = self.eq(a, b);
        self.not(e)
    }

    pub fn ult(&mut self, a: TermId, b: TermId) -> TermId {
        if a == b {
            return self.ff();
        }
        self.build(Op::Ult(a, b), 1)
    }

    pub fn ule(&mut self, a: TermId, b: TermId) -> TermId {
        if a == b {
            return self.tt();
        }
        self.build(Op::Ule(a, b), 1)
    }

    pub fn slt(&mut self, a: TermId, b: TermId) -> TermId {
        if a == b {
            return self.ff();
        }
        self.build(Op::Slt(a, b), 1)
    }

    pub fn sle(&mut self, a: TermId, b: TermId) -> TermId {
        if a == b {
            return self.tt();
        }
        self.build(Op::Sle(a, b), 1)
    }

    pub fn ite(&mut self, c: TermId, t: TermId, e: TermId) -> TermId {
        match self.as_const(c) {
            Some(1) => return t,
            Some(_) => return e,
            None => {}
        }
        if t == e {
            return t;
        }
        if let Op::Not(inner) = self.node(c).op {
            return self.ite(inner, e, t);
        }
        let w = self.width(t);
        if w == 1 {
            match (self.as_const(t), self.as_const(e)) {
                (Some(1), Some(0)) => return c,
                (Some(0), Some(1)) => return self.not(c),
                (Some(1), _) => return self.or(c, e),
                (Some(0), _) => {
                    let nc = self.not(c);
                    return self.and(nc, e);
                }
                (_, Some(1)) => {
                    let nc = self.not(c);
                    return self.or(nc, t);
                }
                (_, Some(0)) => return self.and(c, t),
                _ => {}
            }
        }
        // ite(c, ite(c, a, b), e) == ite(c, a, e)
        if let Op::Ite(c2, a, _) = self.node(t).op {
            if c2 == c {
                return self.ite(c, a, e);
            }
        }
        if let Op::Ite(c2, _, b) = self.node(e).op {
            if c2 == c {
                return self.ite(c, t, b);
            }
        }
        self.build(Op::Ite(c, t, e), w)
    }

    pub fn zext(&mut self, a: TermId, width: u8) -> TermId {
        let w = self.width(a);
        if w == width {
            return a;
        }
        debug_assert!(width > w);
        self.build(Op::ZExt(a), width)
    }

    pub fn sext(&mut self, a: TermId, width: u8) -> TermId {
        let w = self.width(a);
        if w == width {
            return a;
        }
        debug_assert!(width > w);
        self.build(Op::SExt(a), width)
    }

    pub fn extract(&mut self, a: TermId, hi: u8, lo: u8) -> TermId {
        let w = self.width(a);
        let nw = hi - lo + 1;
        if lo == 0 && nw == w {
            return a;
        }
        if lo == 0 {
            if let Op::ZExt(x) | Op::SExt(x) = self.node(a).op {
                let xw = self.width(x);
                if nw == xw {
                    return x;
                }
                if nw < xw {
                    return self.extract(x, hi, 0);
                }
                return match self.node(a).op {
                    Op::ZExt(_) => self.zext(x, nw),
                    _ => self.sext(x, nw),
                };
            }
        }
        self.build(Op::Extract(a, hi, lo), nw)
    }

    /// Truth value of a C scalar: `v != 0` as a 1-bit term.
    pub fn truthy(&mut self, v: TermId) -> TermId {
        if self.width(v) == 1 {
            return v;
        }
        let z = self.constant(self.width(v), 0);
        self.ne(v, z)
    }

    /// Value of every term given symbol values (`None` symbols read as 0).
    pub fn eval_all(&self, syms: &[Option<u64>]) -> Vec<u64> {
        self.eval_upto(syms, self.nodes.len())
    }

    pub fn eval_upto(&self, syms: &[Option<u64>], n: usize) -> Vec<u64> {
        let mut vals = Vec::with_capacity(n);
        for node in &self.nodes[..n] {
            let v = match node.op {
                Op::Sym(s) => syms.get(s.0 as usize).copied().flatten().unwrap_or(0) & mask(node.width),
                op => {
                    let ops = op.operands();
                    let args: Vec<u64> = ops.iter().map(|o| vals[o.0 as usize]).collect();
                    let cw = ops.first().map(|o| self.nodes[o.0 as usize].width).unwrap_or(node.width);
                    eval_op(&op, node.width, cw, &args)
                }
            };
            vals.push(v);
        }
        vals
    }

    /// Ids reachable from `roots`, in ascending order.
    pub fn cone(&self, roots: &[TermId]) -> Vec<TermId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<TermId> = roots.to_vec();
        while let Some(t) = stack.pop() {
            if std::mem::replace(&mut seen[t.0 as usize], true) {
                continue;
            }
            stack.extend(self.node(t).op.operands());
        }
        seen.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| TermId(i as u32)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_and_hash_consing() {
        let mut s = TermStore::new();
        let a = s.constant(8, 200);
        let b = s.constant(8, 100);
        let sum = s.add(a, b);
        assert_eq!(s.as_const(sum), Some(44));
        let (_, x) = s.sym("x", 8, false);
        let e1 = s.add(x, a);
        let e2 = s.add(a, x);
        assert_eq!(e1, e2);
        let z = s.sub(x, x);
        assert_eq!(s.as_const(z), Some(0));
    }

    #[test]
    fn signed_division_edge_cases() {
        let mut s = TermStore::new();
        let min = s.constant(8, 0x80);
        let m1 = s.constant(8, 0xff);
        let q = s.sdiv(min, m1);
        assert_eq!(s.as_const(q), Some(0x80));
        let seven = s.constant(8, (-7i8) as u8 as u64);
        let two = s.constant(8, 2);
        let r = s.srem(seven, two);
        assert_eq!(s.as_const(r), Some(0xff));
        let zero = s.constant(8, 0);
        let q0 = s.udiv(two, zero);
        assert_eq!(s.as_const(q0), Some(0xff));
    }

    #[test]
    fn boolean_rewrites() {
        let mut s = TermStore::new();
        let (_, b) = s.sym("b", 1, false);
        let wide = s.zext(b, 32);
        assert_eq!(s.truthy(wide), b);
        let (_, c) = s.sym("c", 1, false);
        let one = s.constant(32, 1);
        let zero = s.constant(32, 0);
        let two = s.constant(32, 2);
        let inner = s.ite(c, one, two);
        let chain = s.ite(b, zero, inner);
        let test = s.eq(chain, two);
        // (!b && !c) with no Eq node left
        let nb = s.not(b);
        let nc = s.not(c);
        assert_eq!(test, s.and(nb, nc));
        let g = s.and(b, c);
        let h = s.and(b, nc);
        assert_eq!(s.or(g, h), b);
    }

    #[test]
    fn evaluation_matches_folding() {
        let mut s = TermStore::new();
        let (_, x) = s.sym("x", 16, true);
        let (_, y) = s.sym("y", 16, true);
        let d = s.sdiv(x, y);
        let l = s.slt(d, x);
        let vals = s.eval_all(&[Some((-300i16) as u16 as u64), Some(7)]);
        assert_eq!(vals[d.0 as usize], (-42i16) as u16 as u64);
        assert_eq!(vals[l.0 as usize], 0);
    }
}
