//! Bracing and C text rendering.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::frontend::*;

/// Wrap every control-construct body that is not already a block.
pub fn brace(mut p: Program) -> Program {
    let mut ids = p.ids;
    for f in &mut p.functions {
        for s in &mut f.body {
            brace_stmt(s, &mut ids);
        }
    }
    p.ids = ids;
    p
}

fn as_block(s: &mut Box<Stmt>, ids: &mut IdGen) {
    if !matches!(s.kind, StmtKind::Block(_)) {
        let loc = s.meta.loc;
        let inner = std::mem::replace(s.as_mut(), Stmt::new(Meta::default(), StmtKind::Block(Vec::new())));
        **s = Stmt::new(ids.meta(loc), StmtKind::Block(vec![inner]));
    }
}

fn brace_stmt(s: &mut Stmt, ids: &mut IdGen) {
    match &mut s.kind {
        StmtKind::If { then, els, .. } => {
            as_block(then, ids);
            brace_stmt(then, ids);
            if let Some(e) = els {
                as_block(e, ids);
                brace_stmt(e, ids);
            }
        }
        StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } | StmtKind::For { body, .. } => {
            as_block(body, ids);
            brace_stmt(body, ids);
        }
        StmtKind::Block(items) => items.iter_mut().for_each(|i| brace_stmt(i, ids)),
        _ => {}
    }
}

/// True when every control-construct body in `p` is a block.
pub fn is_braced(p: &Program) -> bool {
    let mut ok = true;
    p.walk(&mut |_, s| {
        let bodies: Vec<&Stmt> = match &s.kind {
            StmtKind::If { then, els, .. } => std::iter::once(then.as_ref()).chain(els.as_deref()).collect(),
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } | StmtKind::For { body, .. } => {
                vec![body.as_ref()]
            }
            _ => vec![],
        };
        ok &= bodies.iter().all(|b| matches!(b.kind, StmtKind::Block(_)));
    });
    ok
}

const INDENT: &str = "    ";

/// Render a program as C text: one statement per line, 4-space indentation.
pub fn unparse(p: &Program) -> String {
    unparse_with(p, &UnparseOptions::default())
}

#[derive(Debug, Clone, Default)]
pub struct UnparseOptions {
    /// Omit `Noop` marker statements.
    pub strip_markers: bool,
}

pub fn unparse_with(p: &Program, opts: &UnparseOptions) -> String {
    let mut out = String::new();
    prelude(p, opts, &mut out);
    for g in &p.globals {
        out.push_str(&decl(g));
        out.push_str(";\n");
    }
    if !p.globals.is_empty() {
        out.push('\n');
    }
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let ret = f.ret.map_or("void".to_string(), |t| t.to_string());
        let params = if f.params.is_empty() {
            "void".to_string()
        } else {
            f.params.iter().map(|d| format!("{} {}", d.ty, d.name)).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(out, "{ret} {}({params}) {{", f.name);
        let mut pr = Printer { out: &mut out, opts };
        for s in &f.body {
            pr.stmt(s, 1);
        }
        out.push_str("}\n");
    }
    out
}

/// Declarations that let a stock C compiler accept the output.
fn prelude(p: &Program, opts: &UnparseOptions, out: &mut String) {
    let mut nondets = BTreeSet::new();
    let (mut asserts, mut assumes, mut markers) = (false, false, false);
    p.walk(&mut |_, s| {
        match &s.kind {
            StmtKind::Assert(_) => asserts = true,
            StmtKind::Assume(_) => assumes = true,
            StmtKind::Noop(_) => markers |= !opts.strip_markers,
            _ => {}
        }
        s.own_exprs(&mut |e| {
            e.walk(&mut |x| {
                if let ExprKind::Nondet(name) = &x.kind {
                    nondets.insert((name.clone(), x.ty));
                }
            })
        });
    });
    for g in &p.globals {
        if let Some(e) = &g.init {
            e.walk(&mut |x| {
                if let ExprKind::Nondet(name) = &x.kind {
                    nondets.insert((name.clone(), x.ty));
                }
            });
        }
    }
    let before = out.len();
    if markers {
        out.push_str("#include <stdio.h>\n");
    }
    for (name, ty) in &nondets {
        let _ = writeln!(out, "extern {ty} {name}(void);");
    }
    if asserts {
        out.push_str("extern void __VERIFIER_assert(int);\n");
    }
    if assumes {
        out.push_str("extern void __VERIFIER_assume(int);\n");
    }
    if out.len() > before {
        out.push('\n');
    }
}

fn decl(d: &VarDecl) -> String {
    match &d.init {
        Some(e) => format!("{} {} = {}", d.ty, d.name, expr(e)),
        None => format!("{} {}", d.ty, d.name),
    }
}

struct Printer<'a> {
    out: &'a mut String,
    opts: &'a UnparseOptions,
}

impl Printer<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    /// Print `header` followed by a body; blocks open on the header line.
    fn headed(&mut self, depth: usize, header: &str, body: &Stmt) -> bool {
        match &body.kind {
            StmtKind::Block(items) => {
                self.line(depth, &format!("{header} {{"));
                for s in items {
                    self.stmt(s, depth + 1);
                }
                true
            }
            _ => {
                self.line(depth, header);
                self.stmt(body, depth + 1);
                false
            }
        }
    }

    fn stmt(&mut self, s: &Stmt, depth: usize) {
        match &s.kind {
            StmtKind::Noop(_) if self.opts.strip_markers => {}
            StmtKind::If { cond, then, els } => {
                let braced = self.headed(depth, &format!("if ({})", expr(cond)), then);
                match els {
                    None => {
                        if braced {
                            self.line(depth, "}");
                        }
                    }
                    Some(e) => {
                        if braced {
                            self.headed_close_else(depth, e);
                        } else {
                            self.headed_else(depth, "else", e);
                        }
                    }
                }
            }
            StmtKind::While { cond, body } => {
                if self.headed(depth, &format!("while ({})", expr(cond)), body) {
                    self.line(depth, "}");
                }
            }
            StmtKind::DoWhile { body, cond } => {
                let tail = format!("while ({});", expr(cond));
                if self.headed(depth, "do", body) {
                    self.line(depth, &format!("}} {tail}"));
                } else {
                    self.line(depth, &tail);
                }
            }
            StmtKind::For { init, cond, update, body } => {
                let init = for_clause(init);
                let cond = cond.as_ref().map(expr).unwrap_or_default();
                let update = for_clause(update);
                let header = format!("for ({init}; {cond}; {update})");
                if self.headed(depth, header.trim_end(), body) {
                    self.line(depth, "}");
                }
            }
            StmtKind::Block(items) => {
                self.line(depth, "{");
                for i in items {
                    self.stmt(i, depth + 1);
                }
                self.line(depth, "}");
            }
            _ => {
                let text = simple(s);
                self.line(depth, &format!("{text};"));
            }
        }
    }

    fn headed_close_else(&mut self, depth: usize, e: &Stmt) {
        self.headed_else(depth, "} else", e);
    }

    fn headed_else(&mut self, depth: usize, header: &str, e: &Stmt) {
        if self.headed(depth, header, e) {
            self.line(depth, "}");
        }
    }
}

fn for_clause(stmts: &[Stmt]) -> String {
    // `int i = 0, j = 0` shares one type specifier
    let decls: Option<Vec<&VarDecl>> = stmts
        .iter()
        .map(|s| match &s.kind {
            StmtKind::Decl(d) => Some(d),
            _ => None,
        })
        .collect();
    match decls {
        Some(ds) if ds.len() > 1 => {
            let mut parts = vec![decl(ds[0])];
            for d in &ds[1..] {
                parts.push(match &d.init {
                    Some(e) => format!("{} = {}", d.name, expr(e)),
                    None => d.name.clone(),
                });
            }
            parts.join(", ")
        }
        _ => stmts.iter().map(simple).collect::<Vec<_>>().join(", "),
    }
}

/// Statements that print on one line, without the trailing `;`.
fn simple(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Decl(d) => decl(d),
        StmtKind::Assign { target, op: None, value } => format!("{} = {}", target.name, expr(value)),
        StmtKind::Assign { target, op: Some(op), value } => match (op, &value.kind) {
            (BinOp::Add, ExprKind::Lit(1)) if value.ty == IntType::I32 => format!("{}++", target.name),
            (BinOp::Sub, ExprKind::Lit(1)) if value.ty == IntType::I32 => format!("{}--", target.name),
            _ => format!("{} {}= {}", target.name, op.symbol(), expr(value)),
        },
        StmtKind::Expr(e) => expr(e),
        StmtKind::Break => "break".into(),
        StmtKind::Continue => "continue".into(),
        StmtKind::Return(None) => "return".into(),
        StmtKind::Return(Some(e)) => format!("return {}", expr(e)),
        StmtKind::Assert(e) => format!("__VERIFIER_assert({})", expr(e)),
        StmtKind::Assume(e) => format!("__VERIFIER_assume({})", expr(e)),
        StmtKind::Noop(label) => format!("printf(\"{label}\")"),
        _ => unreachable!("compound statement rendered as simple"),
    }
}

const UNARY_PREC: u8 = 11;

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Unary(..) | ExprKind::Cast(_) => UNARY_PREC,
        _ => UNARY_PREC + 1,
    }
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Lit(v) => literal(*v, e.ty),
        ExprKind::Var(v) => v.name.clone(),
        ExprKind::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
                UnOp::BitNot => "~",
            };
            format!("{sym}{}", unary_operand(inner))
        }
        ExprKind::Cast(inner) => format!("({}){}", e.ty, unary_operand(inner)),
        ExprKind::Binary { op, lhs, rhs, .. } => {
            let p = op.precedence();
            let l = if prec(lhs) < p { format!("({})", expr(lhs)) } else { expr(lhs) };
            let r = if prec(rhs) <= p { format!("({})", expr(rhs)) } else { expr(rhs) };
            format!("{l} {} {r}", op.symbol())
        }
        ExprKind::Nondet(name) => format!("{name}()"),
        ExprKind::Call(name, args) => {
            format!("{name}({})", args.iter().map(expr).collect::<Vec<_>>().join(", "))
        }
    }
}

fn unary_operand(e: &Expr) -> String {
    if prec(e) <= UNARY_PREC {
        format!("({})", expr(e))
    } else {
        expr(e)
    }
}

fn literal(v: u64, ty: IntType) -> String {
    match ty {
        IntType::I32 => format!("{}", ty.to_i128(v)),
        IntType::U32 => format!("{v}u"),
        IntType::I64 => format!("{}LL", ty.to_i128(v)),
        IntType::U64 => format!("{v}ULL"),
        _ => format!("({ty}){}", ty.to_i128(v)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(src: &str) {
        let p = parse(src).unwrap();
        let text = unparse(&p);
        let q = parse(&text).unwrap_or_else(|e| panic!("reparse failed: {e}\n{text}"));
        assert_eq!(p, q, "{text}");
    }

    #[test]
    fn brace_wraps_bodies() {
        let p = parse("int main(){ int i; for (i=0;i<10;i++) if (i==2) i=-1; return 0; }").unwrap();
        assert!(!is_braced(&p));
        let b = brace(p);
        assert!(is_braced(&b));
        let main = b.entry_function();
        let StmtKind::For { body, .. } = &main.body[1].kind else { panic!() };
        let StmtKind::Block(items) = &body.kind else { panic!("for body not a block") };
        let StmtKind::If { then, .. } = &items[0].kind else { panic!() };
        assert!(matches!(then.kind, StmtKind::Block(_)));
        let text = unparse(&b);
        assert!(text.contains("for (i = 0; i < 10; i++) {"), "{text}");
        assert!(text.contains("if (i == 2) {"), "{text}");
    }

    #[test]
    fn brace_if_else_and_idempotence() {
        let p = parse("int main(){ int x; int y; int c = 1; if(c) x=1; else y=2; do x++; while (x < 3); return 0; }").unwrap();
        let b = brace(p);
        let StmtKind::If { then, els, .. } = &b.entry_function().body[3].kind else { panic!() };
        assert!(matches!(then.kind, StmtKind::Block(_)));
        assert!(matches!(els.as_ref().unwrap().kind, StmtKind::Block(_)));
        assert_eq!(brace(b.clone()), b);
        let already = parse("int main(){ while (1) { } return 0; }").unwrap();
        assert_eq!(brace(already.clone()), already);
    }

    #[test]
    fn unparse_roundtrips() {
        roundtrip("int g = -3; unsigned char u; int main(){ long long a = 4294967296; unsigned int b = 7u; a = (a + b) * -(a - 1) << 2; b = ~b ^ (b | 3) & 1; if (a > 1 && !(b == 2) || a != 0) a = 1; else if (b) { b--; } return 0; }");
        roundtrip("int f(int x, char y){ return x - (y - 1); } void h(void){ } int main(void){ int x = f(1, 2); h(); for (int i = 0, j = 1; i < j; i++, j--) { continue; } do { break; } while (0); while (1); }");
        roundtrip("int main(){ int x = nondet_int(); __VERIFIER_assume(x > 0); assert(x != 0); printf(\"hello %d\\n\", x); x = (unsigned char)x; return x % 3 / 2 - - x; }");
    }

    #[test]
    fn noop_marker_rendering() {
        let p = parse("int main(){ printf(\"marker\"); return 0; }").unwrap();
        let text = unparse(&p);
        assert!(text.starts_with("#include <stdio.h>\n"), "{text}");
        assert!(text.contains("    printf(\"marker\");\n"), "{text}");
        let stripped = unparse_with(&p, &UnparseOptions { strip_markers: true });
        assert!(!stripped.contains("printf"), "{stripped}");
    }
}
