//! A CDCL SAT solver: two watched literals, first-UIP learning with clause
//! minimisation, VSIDS, phase saving, Luby restarts and LBD-based clause
//! database reduction.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatError {
    #[error("line {line}: {msg}")]
    Dimacs { line: usize, msg: String },
    #[error("literal {lit} out of range (variables 1..={num_vars})")]
    BadLiteral { lit: i64, num_vars: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    /// `model[v]` is the value of variable `v`; index 0 is unused.
    Sat(Vec<bool>),
    Unsat,
    Timeout(Duration),
}

/// A parsed DIMACS problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dimacs {
    pub num_vars: u32,
    pub clauses: Vec<Vec<i32>>,
}

pub fn parse_dimacs(text: &str) -> Result<Dimacs, SatError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut cur: Vec<i32> = Vec::new();
    let err = |line: usize, msg: &str| SatError::Dimacs { line, msg: msg.to_string() };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('c') || l.starts_with('%') {
            continue;
        }
        if l.starts_with('p') {
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(err(line, "malformed problem line"));
            }
            let v = parts[2].parse().map_err(|_| err(line, "bad variable count"))?;
            let c = parts[3].parse().map_err(|_| err(line, "bad clause count"))?;
            header = Some((v, c));
            continue;
        }
        let (num_vars, _) = header.ok_or_else(|| err(line, "clause before problem line"))?;
        for tok in l.split_whitespace() {
            let x: i64 = tok.parse().map_err(|_| err(line, &format!("bad literal `{tok}`")))?;
            if x == 0 {
                if cur.is_empty() {
                    return Err(err(line, "zero literal with no clause body"));
                }
                clauses.push(std::mem::take(&mut cur));
            } else {
                if x.unsigned_abs() > num_vars as u64 {
                    return Err(SatError::BadLiteral { lit: x, num_vars });
                }
                cur.push(x as i32);
            }
        }
    }
    let (num_vars, _) = header.ok_or_else(|| err(0, "missing problem line"))?;
    if !cur.is_empty() {
        clauses.push(cur);
    }
    Ok(Dimacs { num_vars, clauses })
}

/// Solve with a fresh solver and the default seed.
pub fn solve(num_vars: u32, clauses: &[Vec<i32>], budget: Duration) -> Result<SolveOutcome, SatError> {
    let mut s = Solver::new(num_vars, DEFAULT_SEED);
    for c in clauses {
        s.add_clause(c)?;
    }
    Ok(s.solve(Some(Instant::now() + budget)))
}

/// Whether `model` satisfies every clause.
pub fn check_model(clauses: &[Vec<i32>], model: &[bool]) -> bool {
    clauses.iter().all(|c| {
        c.iter().any(|&l| {
            let v = model.get(l.unsigned_abs() as usize).copied().unwrap_or(false);
            v == (l > 0)
        })
    })
}

type Lit = u32;

fn lit_of(d: i32) -> Lit {
    let v = d.unsigned_abs() - 1;
    2 * v + (d < 0) as u32
}

fn var(l: Lit) -> usize {
    (l >> 1) as usize
}

fn neg(l: Lit) -> Lit {
    l ^ 1
}

const UNDEF: u8 = 2;

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    lbd: u32,
    activity: f64,
}

#[derive(Debug, Clone, Copy)]
struct Watch {
    clause: u32,
    blocker: Lit,
}

/// Max-heap of variables by activity.
#[derive(Debug, Clone, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn contains(&self, v: usize) -> bool {
        self.pos[v].is_some()
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v as u32);
        self.pos[v] = Some(self.heap.len() - 1);
        self.up(self.heap.len() - 1, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()? as usize;
        let last = self.heap.pop().expect("non-empty");
        self.pos[top] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = Some(0);
            self.down(0, act);
        }
        Some(top)
    }

    fn bumped(&mut self, v: usize, act: &[f64]) {
        if let Some(i) = self.pos[v] {
            self.up(i, act);
        }
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let x = self.heap[i];
        while i > 0 {
            let p = (i - 1) / 2;
            if act[self.heap[p] as usize] >= act[x as usize] {
                break;
            }
            self.heap[i] = self.heap[p];
            self.pos[self.heap[i] as usize] = Some(i);
            i = p;
        }
        self.heap[i] = x;
        self.pos[x as usize] = Some(i);
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let x = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let c = if r < self.heap.len() && act[self.heap[r] as usize] > act[self.heap[l] as usize] { r } else { l };
            if act[self.heap[c] as usize] <= act[x as usize] {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i] as usize] = Some(i);
            i = c;
        }
        self.heap[i] = x;
        self.pos[x as usize] = Some(i);
    }
}

/// Luby sequence term `i` (0-based): 1 1 2 1 1 2 4 ...
fn luby(mut i: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1 << seq
}

#[derive(Debug, Clone)]
pub struct Solver {
    num_vars: usize,
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watch>>,
    /// Value per literal: 1 true, 0 false, UNDEF.
    values: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,
    unsat: bool,
    learnts: usize,
    max_learnts: f64,
    rng: ChaCha8Rng,
    pub stats: Stats,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
}

impl Solver {
    pub fn new(num_vars: u32, seed: u64) -> Solver {
        let n = num_vars as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let activity: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 1e-5).collect();
        let mut heap = VarHeap { heap: Vec::with_capacity(n), pos: vec![None; n] };
        for v in 0..n {
            heap.insert(v, &activity);
        }
        Solver {
            num_vars: n,
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            values: vec![UNDEF; 2 * n],
            level: vec![0; n],
            reason: vec![None; n],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            activity,
            var_inc: 1.0,
            cla_inc: 1.0,
            heap,
            phase: vec![false; n],
            seen: vec![false; n],
            unsat: false,
            learnts: 0,
            max_learnts: 0.0,
            rng,
            stats: Stats::default(),
        }
    }

    fn value(&self, l: Lit) -> u8 {
        self.values[l as usize]
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn assign(&mut self, l: Lit, reason: Option<u32>) {
        let v = var(l);
        self.values[l as usize] = 1;
        self.values[neg(l) as usize] = 0;
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Add a clause in DIMACS literals. Must be called before `solve`.
    pub fn add_clause(&mut self, c: &[i32]) -> Result<(), SatError> {
        let mut lits = Vec::with_capacity(c.len());
        for &d in c {
            if d == 0 || d.unsigned_abs() as usize > self.num_vars {
                return Err(SatError::BadLiteral { lit: d as i64, num_vars: self.num_vars as u32 });
            }
            lits.push(lit_of(d));
        }
        if self.unsat {
            return Ok(());
        }
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] == neg(w[1])) {
            return Ok(());
        }
        if lits.iter().any(|&l| self.value(l) == 1) {
            return Ok(());
        }
        lits.retain(|&l| self.value(l) != 0);
        match lits.len() {
            0 => self.unsat = true,
            1 => {
                self.assign(lits[0], None);
                if self.propagate().is_some() {
                    self.unsat = true;
                }
            }
            _ => {
                self.attach(lits, false, 0);
            }
        }
        Ok(())
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool, lbd: u32) -> u32 {
        let id = self.clauses.len() as u32;
        self.watches[lits[0] as usize].push(Watch { clause: id, blocker: lits[1] });
        self.watches[lits[1] as usize].push(Watch { clause: id, blocker: lits[0] });
        self.clauses.push(Clause { lits, learnt, deleted: false, lbd, activity: 0.0 });
        if learnt {
            self.learnts += 1;
        }
        id
    }

    /// Unit propagation; returns a conflicting clause.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = neg(p);
            let mut ws = std::mem::take(&mut self.watches[false_lit as usize]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cid = w.clause as usize;
                if self.clauses[cid].deleted {
                    continue;
                }
                let c = &mut self.clauses[cid].lits;
                if c[0] == false_lit {
                    c.swap(0, 1);
                }
                let first = c[0];
                let w2 = Watch { clause: w.clause, blocker: first };
                if first != w.blocker && self.values[first as usize] == 1 {
                    ws[j] = w2;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..c.len() {
                    if self.values[c[k] as usize] != 0 {
                        c.swap(1, k);
                        let nl = c[1];
                        self.watches[nl as usize].push(w2);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = w2;
                j += 1;
                if self.value(first) == 0 {
                    conflict = Some(w.clause);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        i += 1;
                        j += 1;
                    }
                } else {
                    self.assign(first, Some(w.clause));
                }
            }
            ws.truncate(j);
            let slot = &mut self.watches[false_lit as usize];
            ws.append(slot);
            *slot = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, c: usize) {
        self.clauses[c].activity += self.cla_inc;
        if self.clauses[c].activity > 1e20 {
            for cl in self.clauses.iter_mut().filter(|c| c.learnt) {
                cl.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis; returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![0];
        let mut pending = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let level = self.decision_level();
        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl as usize);
            }
            let lits = self.clauses[confl as usize].lits.clone();
            for &q in lits.iter().skip(if p.is_some() { 1 } else { 0 }) {
                let v = var(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= level {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[var(self.trail[idx])] {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            self.seen[var(pl)] = false;
            pending -= 1;
            if pending == 0 {
                learnt[0] = neg(pl);
                break;
            }
            confl = self.reason[var(pl)].expect("implied literal has a reason");
            // the reason clause has the implied literal first
            let c = &mut self.clauses[confl as usize].lits;
            if c[0] != pl {
                let k = c.iter().position(|&x| x == pl).expect("reason contains literal");
                c.swap(0, k);
            }
        }

        // drop literals implied by the rest of the clause
        let keep: Vec<bool> = learnt
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                i == 0
                    || match self.reason[var(l)] {
                        None => true,
                        Some(r) => self.clauses[r as usize]
                            .lits
                            .iter()
                            .any(|&x| var(x) != var(l) && !self.seen[var(x)] && self.level[var(x)] > 0),
                    }
            })
            .collect();
        for &l in &learnt[1..] {
            self.seen[var(l)] = false;
        }
        let mut out: Vec<Lit> = learnt.iter().zip(&keep).filter(|(_, &k)| k).map(|(&l, _)| l).collect();

        let bt = if out.len() == 1 {
            0
        } else {
            let (mi, _) = out.iter().enumerate().skip(1).max_by_key(|(_, &l)| self.level[var(l)]).expect("len > 1");
            out.swap(1, mi);
            self.level[var(out[1])]
        };
        (out, bt)
    }

    fn lbd(&mut self, lits: &[Lit]) -> u32 {
        let mut levels: Vec<u32> = lits.iter().map(|&l| self.level[var(l)]).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.len() as u32
    }

    fn backtrack(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let start = self.trail_lim[lvl as usize];
        for i in (start..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = var(l);
            self.values[l as usize] = UNDEF;
            self.values[neg(l) as usize] = UNDEF;
            self.reason[v] = None;
            self.phase[v] = l & 1 == 0;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = start;
    }

    fn locked(&self, c: usize) -> bool {
        let l0 = self.clauses[c].lits[0];
        self.value(l0) == 1 && self.reason[var(l0)] == Some(c as u32)
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<usize> = (0..self.clauses.len())
            .filter(|&c| {
                let cl = &self.clauses[c];
                cl.learnt && !cl.deleted && cl.lbd > 2 && !self.locked(c)
            })
            .collect();
        cands.sort_by(|&a, &b| {
            let (x, y) = (&self.clauses[a], &self.clauses[b]);
            y.lbd.cmp(&x.lbd).then(x.activity.partial_cmp(&y.activity).unwrap_or(std::cmp::Ordering::Equal))
        });
        let n = cands.len() / 2;
        for &c in &cands[..n] {
            self.clauses[c].deleted = true;
            self.clauses[c].lits = Vec::new();
            self.learnts -= 1;
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.values[2 * v] == UNDEF {
                return Some(2 * v as u32 + (!self.phase[v]) as u32);
            }
        }
        None
    }

    fn model(&self) -> Vec<bool> {
        let mut m = vec![false; self.num_vars + 1];
        for v in 0..self.num_vars {
            m[v + 1] = self.values[2 * v] == 1;
        }
        m
    }

    /// Run CDCL until a verdict or `deadline`.
    pub fn solve(&mut self, deadline: Option<Instant>) -> SolveOutcome {
        let start = Instant::now();
        if self.unsat {
            return SolveOutcome::Unsat;
        }
        if self.propagate().is_some() {
            self.unsat = true;
            return SolveOutcome::Unsat;
        }
        self.max_learnts = (self.clauses.len() as f64 / 3.0).max(2000.0);
        let expired = |_: Instant| deadline.is_some_and(|d| Instant::now() >= d);
        let mut restart_no = 0u64;
        loop {
            if expired(start) {
                return SolveOutcome::Timeout(start.elapsed());
            }
            let limit = 100 * luby(restart_no);
            let mut conflicts = 0u64;
            loop {
                if let Some(confl) = self.propagate() {
                    self.stats.conflicts += 1;
                    conflicts += 1;
                    if self.decision_level() == 0 {
                        self.unsat = true;
                        return SolveOutcome::Unsat;
                    }
                    let (learnt, bt) = self.analyze(confl);
                    self.backtrack(bt);
                    if learnt.len() == 1 {
                        self.assign(learnt[0], None);
                    } else {
                        let lbd = self.lbd(&learnt);
                        let first = learnt[0];
                        let id = self.attach(learnt, true, lbd);
                        self.bump_clause(id as usize);
                        self.assign(first, Some(id));
                    }
                    self.var_inc /= 0.95;
                    self.cla_inc /= 0.999;
                    if self.stats.conflicts.is_multiple_of(1024) && expired(start) {
                        return SolveOutcome::Timeout(start.elapsed());
                    }
                } else {
                    if conflicts >= limit {
                        self.stats.restarts += 1;
                        restart_no += 1;
                        self.backtrack(0);
                        break;
                    }
                    if self.learnts as f64 >= self.max_learnts + self.trail.len() as f64 {
                        self.reduce_db();
                        self.max_learnts *= 1.1;
                    }
                    self.stats.decisions += 1;
                    if self.stats.decisions.is_multiple_of(8192) && expired(start) {
                        return SolveOutcome::Timeout(start.elapsed());
                    }
                    match self.pick_branch() {
                        None => return SolveOutcome::Sat(self.model()),
                        Some(l) => {
                            // occasional random polarity keeps search from locking in
                            let l = if self.rng.gen_ratio(1, 64) { neg(l) } else { l };
                            self.trail_lim.push(self.trail.len());
                            self.assign(l, None);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUDGET: Duration = Duration::from_secs(30);

    #[test]
    fn trivial_cases() {
        assert_eq!(solve(1, &[vec![1]], BUDGET).unwrap(), SolveOutcome::Sat(vec![false, true]));
        assert_eq!(solve(1, &[vec![1], vec![-1]], BUDGET).unwrap(), SolveOutcome::Unsat);
        assert!(solve(1, &[vec![2]], BUDGET).is_err());
    }

    #[test]
    fn luby_prefix() {
        let s: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(s, [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn dimacs_parsing() {
        let d = parse_dimacs("c hi\np cnf 3 2\n1 -2 0\n3 0\n").unwrap();
        assert_eq!(d, Dimacs { num_vars: 3, clauses: vec![vec![1, -2], vec![3]] });
        assert!(parse_dimacs("p cnf 2 1\n0\n").is_err());
        assert!(parse_dimacs("p cnf 2 1\n3 0\n").is_err());
        assert!(parse_dimacs("1 0\n").is_err());
    }

    fn pigeonhole(n: i32) -> (u32, Vec<Vec<i32>>) {
        // n+1 pigeons into n holes
        let v = |p: i32, h: i32| p * n + h + 1;
        let mut cls = Vec::new();
        for p in 0..=n {
            cls.push((0..n).map(|h| v(p, h)).collect());
        }
        for h in 0..n {
            for p in 0..=n {
                for q in p + 1..=n {
                    cls.push(vec![-v(p, h), -v(q, h)]);
                }
            }
        }
        (((n + 1) * n) as u32, cls)
    }

    #[test]
    fn pigeonhole_is_unsat() {
        for n in 2..=6 {
            let (nv, cls) = pigeonhole(n);
            assert_eq!(solve(nv, &cls, BUDGET).unwrap(), SolveOutcome::Unsat, "php {n}");
        }
    }

    #[test]
    fn deadline_is_respected() {
        let (nv, cls) = pigeonhole(11);
        let start = Instant::now();
        let r = solve(nv, &cls, Duration::from_millis(200)).unwrap();
        assert!(matches!(r, SolveOutcome::Timeout(_)), "{r:?}");
        assert!(start.elapsed() < Duration::from_millis(300), "{:?}", start.elapsed());
    }
}
