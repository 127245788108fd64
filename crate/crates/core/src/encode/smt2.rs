//! SMT-LIB2 (QF_BV) output and an external solver runner.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::term::{Op, TermId, TermStore};
use super::VcFormula;

/// Environment variable consulted when no solver command is configured.
pub const SMT_CMD_ENV: &str = "LOOPRECUR_SMT_CMD";

pub fn emit_smt2(v: &VcFormula) -> String {
    emit_goal(v.store(), v.goal)
}

fn bv(w: u8, v: u64) -> String {
    format!("(_ bv{} {})", v, w)
}

fn name(t: TermId) -> String {
    format!("t{}", t.0)
}

/// Script asserting `goal` (a 1-bit term) over the symbols of `s`.
pub fn emit_goal(s: &TermStore, goal: TermId) -> String {
    let mut out = String::from("(set-logic QF_BV)\n");
    for info in s.syms() {
        let _ = writeln!(out, "(declare-fun {} () (_ BitVec {}))", info.name, info.width);
    }
    for t in s.cone(&[goal]) {
        let node = s.node(t);
        let n = |x: TermId| name(x);
        let b2v = |e: String| format!("(ite {} #b1 #b0)", e);
        let body = match node.op {
            Op::Const(v) => bv(node.width, v),
            Op::Sym(id) => s.sym_info(id).name.clone(),
            Op::Not(a) => format!("(bvnot {})", n(a)),
            Op::And(a, b) => format!("(bvand {} {})", n(a), n(b)),
            Op::Or(a, b) => format!("(bvor {} {})", n(a), n(b)),
            Op::Xor(a, b) => format!("(bvxor {} {})", n(a), n(b)),
            Op::Neg(a) => format!("(bvneg {})", n(a)),
            Op::Add(a, b) => format!("(bvadd {} {})", n(a), n(b)),
            Op::Sub(a, b) => format!("(bvsub {} {})", n(a), n(b)),
            Op::Mul(a, b) => format!("(bvmul {} {})", n(a), n(b)),
            Op::UDiv(a, b) => format!("(bvudiv {} {})", n(a), n(b)),
            Op::URem(a, b) => format!("(bvurem {} {})", n(a), n(b)),
            Op::SDiv(a, b) => format!("(bvsdiv {} {})", n(a), n(b)),
            Op::SRem(a, b) => format!("(bvsrem {} {})", n(a), n(b)),
            Op::Shl(a, b) => format!("(bvshl {} {})", n(a), n(b)),
            Op::LShr(a, b) => format!("(bvlshr {} {})", n(a), n(b)),
            Op::AShr(a, b) => format!("(bvashr {} {})", n(a), n(b)),
            Op::Eq(a, b) => b2v(format!("(= {} {})", n(a), n(b))),
            Op::Ult(a, b) => b2v(format!("(bvult {} {})", n(a), n(b))),
            Op::Ule(a, b) => b2v(format!("(bvule {} {})", n(a), n(b))),
            Op::Slt(a, b) => b2v(format!("(bvslt {} {})", n(a), n(b))),
            Op::Sle(a, b) => b2v(format!("(bvsle {} {})", n(a), n(b))),
            Op::Ite(c, a, b) => format!("(ite (= {} #b1) {} {})", n(c), n(a), n(b)),
            Op::ZExt(a) => format!("((_ zero_extend {}) {})", node.width - s.width(a), n(a)),
            Op::SExt(a) => format!("((_ sign_extend {}) {})", node.width - s.width(a), n(a)),
            Op::Extract(a, hi, lo) => format!("((_ extract {} {}) {})", hi, lo, n(a)),
        };
        let _ = writeln!(out, "(define-fun {} () (_ BitVec {}) {})", name(t), node.width, body);
    }
    let _ = writeln!(out, "(assert (= {} #b1))", name(goal));
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmtAnswer {
    Sat(HashMap<String, u64>),
    Unsat,
    Unknown(String),
    Timeout,
}

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("failed to start solver `{cmd}`: {source}")]
    Spawn { cmd: String, source: std::io::Error },
    #[error("solver i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("unparsable solver output: {0}")]
    Parse(String),
}

/// Run `cmd` through the shell with `script` on stdin; kill it at `timeout`.
pub fn run_solver(cmd: &str, script: &str, timeout: Duration) -> Result<SmtAnswer, SmtError> {
    let start = Instant::now();
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|source| SmtError::Spawn { cmd: cmd.to_string(), source })?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let script = script.to_string();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(script.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(SmtAnswer::Timeout);
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let _ = writer.join();
    let text = reader.join().unwrap_or_default();
    parse_answer(&text)
}

pub fn parse_answer(text: &str) -> Result<SmtAnswer, SmtError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let first = lines.next().unwrap_or("");
    match first {
        "sat" => {
            let rest: String = lines.collect::<Vec<_>>().join("\n");
            Ok(SmtAnswer::Sat(parse_model(&rest)?))
        }
        "unsat" => Ok(SmtAnswer::Unsat),
        "unknown" => Ok(SmtAnswer::Unknown("unknown".into())),
        "timeout" => Ok(SmtAnswer::Timeout),
        l if l.starts_with("(error") => Err(SmtError::Solver(l.to_string())),
        l => Err(SmtError::Parse(l.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    for ch in text.chars() {
        if in_str {
            cur.push(ch);
            if ch == '"' {
                in_str = false;
            }
            continue;
        }
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            '"' => {
                in_str = true;
                cur.push(ch);
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, SmtError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop().filter(|_| !stack.is_empty()).ok_or_else(|| SmtError::Parse("unbalanced ')'".into()))?;
                stack.last_mut().expect("outer list").push(Sexp::List(done));
            }
            a => stack.last_mut().expect("outer list").push(Sexp::Atom(a.to_string())),
        }
    }
    if stack.len() != 1 {
        return Err(SmtError::Parse("unbalanced '('".into()));
    }
    Ok(stack.pop().unwrap_or_default())
}

fn literal(e: &Sexp) -> Option<u64> {
    match e {
        Sexp::Atom(a) => {
            if let Some(b) = a.strip_prefix("#b") {
                u64::from_str_radix(b, 2).ok()
            } else if let Some(h) = a.strip_prefix("#x") {
                u64::from_str_radix(h, 16).ok()
            } else {
                a.parse().ok()
            }
        }
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(u), Sexp::Atom(v), _] if u == "_" => v.strip_prefix("bv")?.parse().ok(),
            _ => None,
        },
    }
}

fn collect_defs(e: &Sexp, out: &mut HashMap<String, u64>) {
    if let Sexp::List(items) = e {
        if let [Sexp::Atom(head), Sexp::Atom(name), .., value] = items.as_slice() {
            if head == "define-fun" {
                if let Some(v) = literal(value) {
                    out.insert(name.clone(), v);
                }
                return;
            }
        }
        for i in items {
            collect_defs(i, out);
        }
    }
}

/// Values of `define-fun` constants in a `(get-model)` response.
pub fn parse_model(text: &str) -> Result<HashMap<String, u64>, SmtError> {
    let mut out = HashMap::new();
    for e in parse_sexps(&tokenize(text))? {
        collect_defs(&e, &mut out);
    }
    Ok(out)
}

/// Symbol values (by symbol id) from a named model.
pub fn model_values(s: &TermStore, model: &HashMap<String, u64>) -> Vec<Option<u64>> {
    s.syms().iter().map(|i| model.get(&i.name).copied()).collect()
}
