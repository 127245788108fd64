//! Bit-blasting of terms into CNF.
//!
//! Literals are DIMACS integers. Variable 1 is constant true. Gates are
//! structurally hashed, and every gate is logged so a circuit can be simulated
//! 64 input patterns at a time.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::term::{Op, TermId, TermStore};
use super::VcFormula;

pub type Lit = i32;

pub const TRUE: Lit = 1;
pub const FALSE: Lit = -1;

/// CNF plus the literals of every symbol's bits, least significant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
    /// Indexed by symbol id: (name, bit literals).
    pub bitmap: Vec<(String, Vec<Lit>)>,
}

impl Cnf {
    /// Symbol values under a total assignment (`model[v]` is variable `v`).
    pub fn decode(&self, model: &[bool]) -> Vec<Option<u64>> {
        self.bitmap
            .iter()
            .map(|(_, bits)| {
                let mut v = 0u64;
                for (i, &l) in bits.iter().enumerate() {
                    if lit_value(model, l) {
                        v |= 1 << i;
                    }
                }
                Some(v)
            })
            .collect()
    }
}

fn lit_value(model: &[bool], l: Lit) -> bool {
    let v = model.get(l.unsigned_abs() as usize).copied().unwrap_or(false);
    if l > 0 {
        v
    } else {
        !v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Gate {
    Input,
    And(Lit, Lit),
    Xor(Lit, Lit),
    Ite(Lit, Lit, Lit),
}

/// Gate builder with Tseitin clauses.
#[derive(Debug, Clone)]
pub struct Blaster {
    clauses: Vec<Vec<Lit>>,
    /// `gates[v]` defines variable `v`; entries 0 and 1 are placeholders.
    gates: Vec<Gate>,
    cache: HashMap<Gate, Lit>,
    terms: HashMap<TermId, Vec<Lit>>,
}

impl Default for Blaster {
    fn default() -> Self {
        Blaster::new()
    }
}

impl Blaster {
    pub fn new() -> Blaster {
        Blaster { clauses: vec![vec![TRUE]], gates: vec![Gate::Input, Gate::Input], cache: HashMap::new(), terms: HashMap::new() }
    }

    pub fn num_vars(&self) -> u32 {
        (self.gates.len() - 1) as u32
    }

    fn var(&mut self, g: Gate) -> Lit {
        self.gates.push(g);
        (self.gates.len() - 1) as Lit
    }

    pub fn input(&mut self) -> Lit {
        self.var(Gate::Input)
    }

    pub fn clause(&mut self, c: Vec<Lit>) {
        self.clauses.push(c);
    }

    pub fn and(&mut self, a: Lit, b: Lit) -> Lit {
        if a == FALSE || b == FALSE || a == -b {
            return FALSE;
        }
        if a == TRUE || a == b {
            return b;
        }
        if b == TRUE {
            return a;
        }
        let key = Gate::And(a.min(b), a.max(b));
        if let Some(&l) = self.cache.get(&key) {
            return l;
        }
        let v = self.var(key);
        self.clauses.push(vec![-v, a]);
        self.clauses.push(vec![-v, b]);
        self.clauses.push(vec![v, -a, -b]);
        self.cache.insert(key, v);
        v
    }

    pub fn or(&mut self, a: Lit, b: Lit) -> Lit {
        -self.and(-a, -b)
    }

    pub fn xor(&mut self, a: Lit, b: Lit) -> Lit {
        if a == b {
            return FALSE;
        }
        if a == -b {
            return TRUE;
        }
        if a.abs() == 1 {
            return if a == TRUE { -b } else { b };
        }
        if b.abs() == 1 {
            return if b == TRUE { -a } else { a };
        }
        let sign = if (a < 0) != (b < 0) { -1 } else { 1 };
        let (x, y) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
        let key = Gate::Xor(x, y);
        let v = match self.cache.get(&key) {
            Some(&l) => l,
            None => {
                let v = self.var(key);
                self.clauses.push(vec![-v, x, y]);
                self.clauses.push(vec![-v, -x, -y]);
                self.clauses.push(vec![v, -x, y]);
                self.clauses.push(vec![v, x, -y]);
                self.cache.insert(key, v);
                v
            }
        };
        sign * v
    }

    pub fn ite(&mut self, c: Lit, t: Lit, e: Lit) -> Lit {
        if c == TRUE || t == e {
            return t;
        }
        if c == FALSE {
            return e;
        }
        if t == TRUE || t == c {
            return self.or(c, e);
        }
        if t == FALSE || t == -c {
            return self.and(-c, e);
        }
        if e == FALSE || e == c {
            return self.and(c, t);
        }
        if e == TRUE || e == -c {
            return self.or(-c, t);
        }
        let (c, t, e) = if c < 0 { (-c, e, t) } else { (c, t, e) };
        let key = Gate::Ite(c, t, e);
        if let Some(&l) = self.cache.get(&key) {
            return l;
        }
        let v = self.var(key);
        self.clauses.push(vec![-v, -c, t]);
        self.clauses.push(vec![-v, c, e]);
        self.clauses.push(vec![v, -c, -t]);
        self.clauses.push(vec![v, c, -e]);
        self.clauses.push(vec![-v, t, e]);
        self.clauses.push(vec![v, -t, -e]);
        self.cache.insert(key, v);
        v
    }

    fn and_all(&mut self, xs: &[Lit]) -> Lit {
        xs.iter().fold(TRUE, |acc, &x| self.and(acc, x))
    }

    fn or_all(&mut self, xs: &[Lit]) -> Lit {
        xs.iter().fold(FALSE, |acc, &x| self.or(acc, x))
    }

    /// Sum and carry-out of `a + b + cin`.
    fn adder(&mut self, a: &[Lit], b: &[Lit], cin: Lit) -> (Vec<Lit>, Lit) {
        let mut c = cin;
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let p = self.xor(x, y);
            out.push(self.xor(p, c));
            let g = self.and(x, y);
            let pc = self.and(p, c);
            c = self.or(g, pc);
        }
        (out, c)
    }

    fn add(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        self.adder(a, b, FALSE).0
    }

    fn sub(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        let nb: Vec<Lit> = b.iter().map(|&x| -x).collect();
        self.adder(a, &nb, TRUE).0
    }

    fn neg(&mut self, a: &[Lit]) -> Vec<Lit> {
        let zero = vec![FALSE; a.len()];
        self.sub(&zero, a)
    }

    fn mul(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        let w = a.len();
        let mut acc = vec![FALSE; w];
        for (i, &bi) in b.iter().enumerate() {
            let partial: Vec<Lit> = (0..w - i).map(|j| self.and(a[j], bi)).collect();
            let (sum, _) = self.adder(&acc[i..], &partial, FALSE);
            acc[i..].copy_from_slice(&sum);
        }
        acc
    }

    /// Unsigned `a < b`.
    fn ult(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let nb: Vec<Lit> = b.iter().map(|&x| -x).collect();
        let (_, carry) = self.adder(a, &nb, TRUE);
        -carry
    }

    fn slt(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let flip = |v: &[Lit]| {
            let mut v = v.to_vec();
            let last = v.len() - 1;
            v[last] = -v[last];
            v
        };
        self.ult(&flip(a), &flip(b))
    }

    fn equal(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let bits: Vec<Lit> = a.iter().zip(b).map(|(&x, &y)| -self.xor(x, y)).collect();
        self.and_all(&bits)
    }

    fn mux(&mut self, c: Lit, t: &[Lit], e: &[Lit]) -> Vec<Lit> {
        t.iter().zip(e).map(|(&x, &y)| self.ite(c, x, y)).collect()
    }

    /// Restoring division; a zero divisor yields all-ones and the dividend.
    fn udivrem(&mut self, a: &[Lit], b: &[Lit]) -> (Vec<Lit>, Vec<Lit>) {
        let w = a.len();
        let mut bw = b.to_vec();
        bw.push(FALSE);
        let mut r = vec![FALSE; w + 1];
        let mut q = vec![FALSE; w];
        for i in (0..w).rev() {
            r.rotate_right(1);
            r[0] = a[i];
            let nb: Vec<Lit> = bw.iter().map(|&x| -x).collect();
            let (diff, no_borrow) = self.adder(&r, &nb, TRUE);
            q[i] = no_borrow;
            r = self.mux(no_borrow, &diff, &r);
        }
        r.truncate(w);
        (q, r)
    }

    fn abs(&mut self, a: &[Lit]) -> Vec<Lit> {
        let s = a[a.len() - 1];
        let n = self.neg(a);
        self.mux(s, &n, a)
    }

    fn shift(&mut self, a: &[Lit], b: &[Lit], kind: ShiftKind) -> Vec<Lit> {
        let w = a.len();
        let fill = if kind == ShiftKind::Ashr { a[w - 1] } else { FALSE };
        let mut cur = a.to_vec();
        let mut stage = 0;
        while (1usize << stage) < w {
            let d = 1usize << stage;
            let shifted: Vec<Lit> = (0..w)
                .map(|i| match kind {
                    ShiftKind::Shl => {
                        if i >= d {
                            cur[i - d]
                        } else {
                            FALSE
                        }
                    }
                    _ => {
                        if i + d < w {
                            cur[i + d]
                        } else {
                            fill
                        }
                    }
                })
                .collect();
            cur = self.mux(b[stage], &shifted, &cur);
            stage += 1;
        }
        let over = self.or_all(&b[stage..]);
        let all_fill = vec![fill; w];
        self.mux(over, &all_fill, &cur)
    }

    /// Bits of `t`, blasting its operands first.
    pub fn term(&mut self, s: &TermStore, t: TermId) -> Vec<Lit> {
        if let Some(b) = self.terms.get(&t) {
            return b.clone();
        }
        for u in s.cone(&[t]) {
            if !self.terms.contains_key(&u) {
                let bits = self.blast_node(s, u);
                self.terms.insert(u, bits);
            }
        }
        self.terms[&t].clone()
    }

    /// Bind a symbol's bits explicitly (so unused symbols still get variables).
    pub fn bind(&mut self, t: TermId, bits: Vec<Lit>) {
        self.terms.insert(t, bits);
    }

    fn blast_node(&mut self, s: &TermStore, t: TermId) -> Vec<Lit> {
        let node = s.node(t);
        let w = node.width as usize;
        let ops: HashMap<TermId, Vec<Lit>> =
            node.op.operands().into_iter().map(|o| (o, self.terms[&o].clone())).collect();
        let get = |x: TermId| ops[&x].clone();
        match node.op {
            Op::Const(v) => (0..w).map(|i| if v >> i & 1 == 1 { TRUE } else { FALSE }).collect(),
            Op::Sym(_) => (0..w).map(|_| self.input()).collect(),
            Op::Not(a) => get(a).iter().map(|&x| -x).collect(),
            Op::And(a, b) => {
                let (a, b) = (get(a), get(b));
                a.iter().zip(&b).map(|(&x, &y)| self.and(x, y)).collect()
            }
            Op::Or(a, b) => {
                let (a, b) = (get(a), get(b));
                a.iter().zip(&b).map(|(&x, &y)| self.or(x, y)).collect()
            }
            Op::Xor(a, b) => {
                let (a, b) = (get(a), get(b));
                a.iter().zip(&b).map(|(&x, &y)| self.xor(x, y)).collect()
            }
            Op::Neg(a) => {
                let a = get(a);
                self.neg(&a)
            }
            Op::Add(a, b) => {
                let (a, b) = (get(a), get(b));
                self.add(&a, &b)
            }
            Op::Sub(a, b) => {
                let (a, b) = (get(a), get(b));
                self.sub(&a, &b)
            }
            Op::Mul(a, b) => {
                let (a, b) = (get(a), get(b));
                self.mul(&a, &b)
            }
            Op::UDiv(a, b) => {
                let (a, b) = (get(a), get(b));
                self.udivrem(&a, &b).0
            }
            Op::URem(a, b) => {
                let (a, b) = (get(a), get(b));
                self.udivrem(&a, &b).1
            }
            Op::SDiv(a, b) => {
                let (a, b) = (get(a), get(b));
                let (sa, sb) = (a[w - 1], b[w - 1]);
                let (aa, ab) = (self.abs(&a), self.abs(&b));
                let (q, _) = self.udivrem(&aa, &ab);
                let nq = self.neg(&q);
                let flip = self.xor(sa, sb);
                self.mux(flip, &nq, &q)
            }
            Op::SRem(a, b) => {
                let (a, b) = (get(a), get(b));
                let sa = a[w - 1];
                let (aa, ab) = (self.abs(&a), self.abs(&b));
                let (_, r) = self.udivrem(&aa, &ab);
                let nr = self.neg(&r);
                self.mux(sa, &nr, &r)
            }
            Op::Shl(a, b) => {
                let (a, b) = (get(a), get(b));
                self.shift(&a, &b, ShiftKind::Shl)
            }
            Op::LShr(a, b) => {
                let (a, b) = (get(a), get(b));
                self.shift(&a, &b, ShiftKind::Lshr)
            }
            Op::AShr(a, b) => {
                let (a, b) = (get(a), get(b));
                self.shift(&a, &b, ShiftKind::Ashr)
            }
            Op::Eq(a, b) => {
                let (a, b) = (get(a), get(b));
                vec![self.equal(&a, &b)]
            }
            Op::Ult(a, b) => {
                let (a, b) = (get(a), get(b));
                vec![self.ult(&a, &b)]
            }
            Op::Ule(a, b) => {
                let (a, b) = (get(a), get(b));
                vec![-self.ult(&b, &a)]
            }
            Op::Slt(a, b) => {
                let (a, b) = (get(a), get(b));
                vec![self.slt(&a, &b)]
            }
            Op::Sle(a, b) => {
                let (a, b) = (get(a), get(b));
                vec![-self.slt(&b, &a)]
            }
            Op::Ite(c, x, y) => {
                let (c, x, y) = (get(c)[0], get(x), get(y));
                self.mux(c, &x, &y)
            }
            Op::ZExt(a) => {
                let mut a = get(a);
                a.resize(w, FALSE);
                a
            }
            Op::SExt(a) => {
                let mut a = get(a);
                let top = a[a.len() - 1];
                a.resize(w, top);
                a
            }
            Op::Extract(a, hi, lo) => get(a)[lo as usize..=hi as usize].to_vec(),
        }
    }

    /// Values of every variable for 64 input patterns at once.
    /// `inputs` gives the lanes of each input variable; missing inputs are 0.
    pub fn simulate(&self, inputs: &HashMap<u32, u64>) -> Vec<u64> {
        let mut v = vec![0u64; self.gates.len()];
        let lit = |v: &[u64], l: Lit| {
            let x = v[l.unsigned_abs() as usize];
            if l > 0 {
                x
            } else {
                !x
            }
        };
        if v.len() > 1 {
            v[1] = u64::MAX;
        }
        for i in 2..self.gates.len() {
            v[i] = match self.gates[i] {
                Gate::Input => inputs.get(&(i as u32)).copied().unwrap_or(0),
                Gate::And(a, b) => lit(&v, a) & lit(&v, b),
                Gate::Xor(a, b) => lit(&v, a) ^ lit(&v, b),
                Gate::Ite(c, t, e) => {
                    let c = lit(&v, c);
                    (c & lit(&v, t)) | (!c & lit(&v, e))
                }
            };
        }
        v
    }

    pub fn into_cnf(self, bitmap: Vec<(String, Vec<Lit>)>) -> Cnf {
        Cnf { num_vars: self.num_vars(), clauses: self.clauses, bitmap }
    }
}

/// Lanes of a (possibly negated) literal in a simulation result.
pub fn lanes(values: &[u64], l: Lit) -> u64 {
    let x = values[l.unsigned_abs() as usize];
    if l > 0 {
        x
    } else {
        !x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ShiftKind {
    Shl,
    Lshr,
    Ashr,
}

/// Blast the goal of `v` and assert it.
pub fn bitblast(v: &VcFormula) -> Cnf {
    blast_goal(v.store(), v.goal)
}

pub fn blast_goal(s: &TermStore, goal: TermId) -> Cnf {
    let mut b = Blaster::new();
    let mut bitmap = Vec::with_capacity(s.syms().len());
    let sym_terms = sym_terms(s);
    for (i, info) in s.syms().iter().enumerate() {
        let bits: Vec<Lit> = (0..info.width).map(|_| b.input()).collect();
        if let Some(t) = sym_terms[i] {
            b.bind(t, bits.clone());
        }
        bitmap.push((info.name.clone(), bits));
    }
    let g = b.term(s, goal)[0];
    b.clause(vec![g]);
    b.into_cnf(bitmap)
}

fn sym_terms(s: &TermStore) -> Vec<Option<TermId>> {
    let mut out = vec![None; s.syms().len()];
    for i in 0..s.len() {
        if let Op::Sym(id) = s.node(TermId(i as u32)).op {
            out[id.0 as usize] = Some(TermId(i as u32));
        }
    }
    out
}

/// DIMACS text for `c`.
pub fn emit_dimacs(c: &Cnf) -> String {
    let mut out = String::new();
    for (name, bits) in &c.bitmap {
        let lits: Vec<String> = bits.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(out, "c sym {} {}", name, lits.join(" "));
    }
    let _ = writeln!(out, "p cnf {} {}", c.num_vars, c.clauses.len());
    for cl in &c.clauses {
        for l in cl {
            let _ = write!(out, "{} ", l);
        }
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(c: &Cnf) -> bool {
        let n = c.num_vars as usize;
        assert!(n <= 20);
        (0u32..1 << n).any(|m| {
            let model: Vec<bool> = (0..=n).map(|v| v > 0 && (m >> (v - 1)) & 1 == 1).collect();
            c.clauses.iter().all(|cl| cl.iter().any(|&l| lit_value(&model, l)))
        })
    }

    #[test]
    fn single_bit_equality_is_xnor() {
        let mut s = TermStore::new();
        let (_, x) = s.sym("x", 1, false);
        let (_, y) = s.sym("y", 1, false);
        let mut b = Blaster::new();
        let bx = b.term(&s, x);
        let by = b.term(&s, y);
        let before = b.clauses.len();
        let e = s.eq(x, y);
        let be = b.term(&s, e);
        assert_eq!(b.clauses.len() - before, 4);
        let sim = b.simulate(&HashMap::from([(bx[0] as u32, 0b0101), (by[0] as u32, 0b0011)]));
        assert_eq!(lanes(&sim, be[0]) & 0xf, 0b1001);
    }

    #[test]
    fn false_goal_gives_empty_unit() {
        let mut s = TermStore::new();
        let ff = s.ff();
        let c = blast_goal(&s, ff);
        assert!(c.clauses.contains(&vec![FALSE]));
        assert!(!brute(&c));
    }

    #[test]
    fn contradiction_is_unsat() {
        let mut s = TermStore::new();
        let (_, x) = s.sym("x", 1, false);
        let nx = s.not(x);
        let g = s.and(x, nx);
        assert!(!brute(&blast_goal(&s, g)));
        let (_, y) = s.sym("y", 1, false);
        let g = s.xor(x, y);
        assert!(brute(&blast_goal(&s, g)));
    }

    #[test]
    fn dimacs_text() {
        let c = Cnf { num_vars: 1, clauses: vec![vec![1]], bitmap: vec![] };
        assert_eq!(emit_dimacs(&c), "p cnf 1 1\n1 0\n");
    }

    #[test]
    fn sum_equality_truth_table() {
        let mut s = TermStore::new();
        let (_, x) = s.sym("x", 8, false);
        let (_, y) = s.sym("y", 8, false);
        let (_, z) = s.sym("z", 8, false);
        let sum = s.add(x, y);
        let e = s.eq(sum, z);
        let mut b = Blaster::new();
        let (bx, by, bz) = (b.term(&s, x), b.term(&s, y), b.term(&s, z));
        let be = b.term(&s, e)[0];
        // z is fixed per batch; x,y range over all 2^16 pairs
        for zv in [0u64, 7, 200] {
            for batch in 0..1024u64 {
                let mut inputs = HashMap::new();
                for lane in 0..64u64 {
                    let pair = batch * 64 + lane;
                    let (xv, yv) = (pair & 0xff, pair >> 8);
                    for i in 0..8 {
                        *inputs.entry(bx[i] as u32).or_insert(0) |= (xv >> i & 1) << lane;
                        *inputs.entry(by[i] as u32).or_insert(0) |= (yv >> i & 1) << lane;
                        *inputs.entry(bz[i] as u32).or_insert(0) |= (zv >> i & 1) << lane;
                    }
                }
                let sim = b.simulate(&inputs);
                let got = lanes(&sim, be);
                for lane in 0..64u64 {
                    let pair = batch * 64 + lane;
                    let want = ((pair & 0xff) + (pair >> 8)) & 0xff == zv;
                    assert_eq!(got >> lane & 1 == 1, want, "x+y==z at pair {pair} z {zv}");
                }
            }
        }
    }
}
