//! Lexing, parsing and checking of MiniC source.

pub mod ast;
mod check;
mod lexer;
mod parser;
pub mod types;

use std::fmt;

pub use ast::*;
pub use check::{call_graph, topological_order};
pub use parser::{literal_type, nondet_intrinsic};
pub use types::IntType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub loc: Loc,
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl Diagnostic {
    pub fn error(loc: Loc, message: impl Into<String>) -> Diagnostic {
        Diagnostic { loc, severity: Severity::Error, kind: DiagnosticKind::Syntax, message: message.into() }
    }

    pub fn unsupported(loc: Loc, what: &str) -> Diagnostic {
        Diagnostic {
            loc,
            severity: Severity::Error,
            kind: DiagnosticKind::Unsupported,
            message: format!("unsupported feature: {what}"),
        }
    }

    /// `file:line:col: severity: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.loc.line, self.loc.col, self.message)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{}", .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct FrontendError {
    pub diagnostics: Vec<Diagnostic>,
}

impl FrontendError {
    pub fn render(&self, file: &str) -> String {
        self.diagnostics.iter().map(|d| d.render(file)).collect::<Vec<_>>().join("\n")
    }

    pub fn is_unsupported(&self) -> bool {
        self.diagnostics.iter().any(|d| d.kind == DiagnosticKind::Unsupported)
    }
}

impl From<Diagnostic> for FrontendError {
    fn from(d: Diagnostic) -> Self {
        FrontendError { diagnostics: vec![d] }
    }
}

/// Parse MiniC source into a resolved, typed program.
///
/// Recursion is rejected here as well as in [`check_supported`], so every
/// returned program satisfies the acyclic-call-graph invariant.
pub fn parse(source: &str) -> Result<Program, FrontendError> {
    let mut p = parser::parse_source(source)?;
    check::resolve(&mut p).map_err(|diagnostics| FrontendError { diagnostics })?;
    let void_uses = check::check_void_values(&p);
    if !void_uses.is_empty() {
        return Err(FrontendError { diagnostics: void_uses });
    }
    topological_order(&p)?;
    Ok(p)
}

/// Confirm the program is inside the analyzable subset and mark helpers for inlining.
pub fn check_supported(mut p: Program) -> Result<Program, FrontendError> {
    let mut diags = Vec::new();
    if let Err(d) = topological_order(&p) {
        diags.push(d);
    }
    let mut bad_type = |ty: IntType, loc: Loc| {
        if IntType::new(ty.width, ty.signed).is_none() {
            diags.push(Diagnostic::unsupported(loc, &format!("{}-bit integer type", ty.width)));
        }
    };
    for g in &p.globals {
        bad_type(g.ty, g.meta.loc);
    }
    for f in &p.functions {
        f.params.iter().for_each(|d| bad_type(d.ty, d.meta.loc));
    }
    p.walk(&mut |_, s| {
        if let StmtKind::Decl(d) = &s.kind {
            bad_type(d.ty, d.meta.loc);
        }
    });
    if !diags.is_empty() {
        return Err(FrontendError { diagnostics: diags });
    }
    let entry = p.entry.clone();
    for f in &mut p.functions {
        f.inline = f.name != entry;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(src: &str) -> FrontendError {
        parse(src).expect_err("expected a diagnostic")
    }

    #[test]
    fn minimal_loop() {
        let p = parse("int main(void){ while(1); return 0; }").unwrap();
        let main = p.entry_function();
        assert_eq!(main.body.len(), 2);
        match &main.body[0].kind {
            StmtKind::While { cond, body } => {
                assert_eq!(cond.kind, ExprKind::Lit(1));
                assert_eq!(body.kind, StmtKind::Block(vec![]));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn recursion_rejected() {
        let e = err("int f(){return f();} int main(){return f();}");
        assert!(e.is_unsupported());
        assert!(e.to_string().contains("recursion"), "{e}");
        let e = err("int g(int x); int f(int x){ return g(x); } int g(int x){ return f(x); } int main(){ return f(1); }");
        assert!(e.to_string().contains("recursion"), "{e}");
    }

    #[test]
    fn unsupported_features_named() {
        for (src, what) in [
            ("int main(){ int a[3]; return 0; }", "arrays"),
            ("int main(){ int *p; return 0; }", "pointers"),
            ("struct s { int x; }; int main(){ return 0; }", "structs"),
            ("int main(){ goto l; return 0; }", "goto"),
            ("int main(){ int x = 0; int y = x ? 1 : 2; return y; }", "conditional"),
        ] {
            let e = err(src);
            assert!(e.is_unsupported(), "{src}: {e}");
            assert!(e.to_string().contains(what), "{src}: {e}");
        }
    }

    #[test]
    fn diagnostics_carry_locations() {
        let e = err("int main() {\n  x = 1;\n  return 0;\n}");
        assert_eq!(e.render("a.c"), "a.c:2:3: error: use of undeclared variable `x`");
        let e = err("int main() {\n  return 0\n}");
        assert!(e.render("a.c").starts_with("a.c:3:1: error: expected `;`"), "{}", e.render("a.c"));
    }

    #[test]
    fn typing_follows_c_conversions() {
        let p = parse("int main(){ unsigned char x = 0; long long y = 1; unsigned int u = 2; int a = x < 300; long long b = y + u; unsigned int c = u - 1; return 0; }").unwrap();
        let inits: Vec<&Expr> = p.entry_function().body.iter().filter_map(|s| match &s.kind {
            StmtKind::Decl(d) => d.init.as_ref(),
            _ => None,
        }).collect();
        match &inits[3].kind {
            ExprKind::Binary { op_ty, .. } => assert_eq!(*op_ty, IntType::I32),
            _ => panic!(),
        }
        assert_eq!(inits[4].ty, IntType::I64);
        assert_eq!(inits[5].ty, IntType::U32);
    }

    #[test]
    fn shadowing_resolves_to_innermost() {
        let p = parse("int x; int main(){ int x = 1; { int x = 2; x = 3; } x = 4; return x; }").unwrap();
        let mut targets = Vec::new();
        p.walk(&mut |_, s| {
            if let StmtKind::Assign { target, .. } = &s.kind {
                targets.push(target.id);
            }
        });
        assert_ne!(targets[0], targets[1]);
        assert_ne!(targets[0], p.globals[0].id);
    }

    #[test]
    fn calls_only_at_statement_level() {
        let ok = "int f(int a){ return a + 1; } int main(){ int x = f(2); x = f(x); f(x); return f(x); }";
        parse(ok).unwrap();
        let e = err("int f(int a){ return a; } int main(){ int x = f(1) + 1; return x; }");
        assert!(e.is_unsupported());
        let e = err("void f(){ } int main(){ int x = f(); return x; }");
        assert!(e.to_string().contains("void"), "{e}");
    }

    #[test]
    fn check_supported_marks_helpers() {
        let p = parse("int h(int a){ return a * 2; } int g(int a){ int r = h(a); return r; } int main(){ int x = g(1); return x; }").unwrap();
        let order = topological_order(&p).unwrap();
        assert_eq!(order, vec!["h", "g", "main"]);
        let q = check_supported(p).unwrap();
        let marked: Vec<_> = q.functions.iter().filter(|f| f.inline).map(|f| f.name.as_str()).collect();
        assert_eq!(marked, vec!["h", "g"]);
    }

    #[test]
    fn check_supported_is_identity_on_loop_free_main() {
        let p = parse("int main(){ int x = 1; x += 2; return x; }").unwrap();
        let q = check_supported(p.clone()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn intrinsic_statements() {
        let p = parse("int main(){ int x = nondet_int(); __VERIFIER_assume(x > 0); assert(x != 0); printf(\"x=%d\\n\", x); return 0; }").unwrap();
        let kinds: Vec<&StmtKind> = p.entry_function().body.iter().map(|s| &s.kind).collect();
        assert!(matches!(kinds[1], StmtKind::Assume(_)));
        assert!(matches!(kinds[2], StmtKind::Assert(_)));
        assert_eq!(*kinds[3], StmtKind::Noop("x=%d\\n".into()));
    }
}
