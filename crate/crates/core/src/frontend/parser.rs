//! Recursive-descent parser for MiniC.
//!
//! The parser builds the final AST shape but leaves variable ids and types as
//! placeholders; [`super::check`] resolves them.

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::types::{parse_type_words, IntType};
use super::Diagnostic;

const TYPE_WORDS: [&str; 8] = ["int", "char", "short", "long", "signed", "unsigned", "_Bool", "bool"];
const QUALIFIERS: [&str; 7] = ["const", "volatile", "extern", "register", "inline", "auto", "static"];
const UNSUPPORTED_TYPES: [(&str, &str); 7] = [
    ("struct", "structs"),
    ("union", "unions"),
    ("enum", "enums"),
    ("typedef", "typedefs"),
    ("float", "floating-point types"),
    ("double", "floating-point types"),
    ("sizeof", "sizeof"),
];

pub const ASSERT_NAMES: [&str; 3] = ["assert", "__VERIFIER_assert", "__CPROVER_assert"];
pub const ASSUME_NAMES: [&str; 3] = ["assume", "__VERIFIER_assume", "__CPROVER_assume"];

/// Nondet intrinsic name → produced type.
pub fn nondet_intrinsic(name: &str) -> Option<IntType> {
    let suffix = name.strip_prefix("__VERIFIER_nondet_").or_else(|| name.strip_prefix("nondet_"))?;
    IntType::from_nondet_suffix(suffix)
}

fn is_intrinsic(name: &str) -> bool {
    nondet_intrinsic(name).is_some()
        || ASSERT_NAMES.contains(&name)
        || ASSUME_NAMES.contains(&name)
        || name == "printf"
}

pub(super) fn parse_source(src: &str) -> Result<Program, Diagnostic> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, ids: IdGen::default() };
    p.program()
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    ids: IdGen,
}

/// Type specifier parsed from a declaration: `None` is `void`.
type DeclType = Option<IntType>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].loc
    }

    fn meta(&mut self, loc: Loc) -> Meta {
        self.ids.meta(loc)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(q) if q == s)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{p}`")))
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> Diagnostic {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int { value, .. } => format!("`{value}`"),
            Tok::Char(_) => "character literal".into(),
            Tok::Str(_) => "string literal".into(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        };
        Diagnostic::error(self.loc(), format!("{}, found {found}", msg.into()))
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.syntax("expected identifier")),
        }
    }

    fn check_unsupported_word(&self) -> PResult<()> {
        if let Tok::Ident(s) = self.peek() {
            if let Some((_, what)) = UNSUPPORTED_TYPES.iter().find(|(w, _)| w == s) {
                return Err(Diagnostic::unsupported(self.loc(), what));
            }
            for (kw, what) in [("goto", "goto"), ("switch", "switch statements"), ("case", "switch statements")] {
                if s == kw {
                    return Err(Diagnostic::unsupported(self.loc(), what));
                }
            }
        }
        Ok(())
    }

    fn starts_type(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => {
                TYPE_WORDS.contains(&s.as_str()) || QUALIFIERS.contains(&s.as_str()) || s == "void"
            }
            _ => false,
        }
    }

    /// Parse qualifiers and type words. Returns the type and whether `static` was seen.
    fn decl_type(&mut self) -> PResult<(DeclType, bool)> {
        let loc = self.loc();
        let mut words = Vec::new();
        let mut is_static = false;
        let mut void = false;
        loop {
            self.check_unsupported_word()?;
            match self.peek().clone() {
                Tok::Ident(s) if QUALIFIERS.contains(&s.as_str()) => {
                    is_static |= s == "static";
                    self.bump();
                }
                Tok::Ident(s) if TYPE_WORDS.contains(&s.as_str()) => {
                    words.push(s);
                    self.bump();
                }
                Tok::Ident(s) if s == "void" && words.is_empty() && !void => {
                    void = true;
                    self.bump();
                }
                _ => break,
            }
        }
        if self.is_punct("*") {
            return Err(Diagnostic::unsupported(self.loc(), "pointers"));
        }
        if void {
            if !words.is_empty() {
                return Err(Diagnostic::error(loc, "invalid type specifier"));
            }
            return Ok((None, is_static));
        }
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        match parse_type_words(&refs) {
            Some(t) => Ok((Some(t), is_static)),
            None if words.is_empty() => Err(self.syntax("expected type")),
            None => Err(Diagnostic::error(loc, format!("unsupported type `{}`", words.join(" ")))),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut globals = Vec::new();
        let mut functions = Vec::new();
        while *self.peek() != Tok::Eof {
            if self.eat_punct(";") {
                continue;
            }
            self.check_unsupported_word()?;
            let loc = self.loc();
            let (ty, _) = self.decl_type()?;
            let name_loc = self.loc();
            let name = self.ident()?;
            if self.is_punct("(") {
                if let Some(f) = self.function(loc, ty, name)? {
                    functions.push(f);
                }
            } else {
                let ty = ty.ok_or_else(|| Diagnostic::error(loc, "variable declared void"))?;
                globals.extend(self.declarators(ty, name, name_loc)?);
                self.expect(";")?;
            }
        }
        Ok(Program { globals, functions, entry: "main".into(), ids: self.ids })
    }

    /// Function definition, or `None` for a prototype.
    fn function(&mut self, loc: Loc, ret: DeclType, name: String) -> PResult<Option<Function>> {
        self.expect("(")?;
        let mut params = Vec::new();
        if self.is_ident("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.bump();
        }
        if !self.is_punct(")") {
            loop {
                let ploc = self.loc();
                let (ty, _) = self.decl_type()?;
                let ty = ty.ok_or_else(|| Diagnostic::error(ploc, "parameter declared void"))?;
                // prototypes may omit parameter names
                let pname = match self.peek() {
                    Tok::Ident(_) => self.ident()?,
                    _ => String::new(),
                };
                if self.is_punct("[") {
                    return Err(Diagnostic::unsupported(self.loc(), "arrays"));
                }
                let meta = self.meta(ploc);
                params.push(VarDecl { meta, name: pname, id: VarId(0), ty, init: None });
                if !self.eat_punct(",") {
                    break;
                }
                if self.is_punct("...") {
                    return Err(Diagnostic::unsupported(self.loc(), "variadic functions"));
                }
            }
        }
        self.expect(")")?;
        if self.eat_punct(";") {
            return Ok(None);
        }
        if let Some(p) = params.iter().find(|p| p.name.is_empty()) {
            return Err(Diagnostic::error(p.meta.loc, "parameter name omitted in function definition"));
        }
        if is_intrinsic(&name) {
            return Err(Diagnostic::error(loc, format!("cannot redefine intrinsic `{name}`")));
        }
        let body_loc = self.loc();
        self.expect("{")?;
        let body = self.block_items(body_loc)?;
        let meta = self.meta(loc);
        Ok(Some(Function { meta, name, ret, params, body, inline: false }))
    }

    fn declarators(&mut self, ty: IntType, first: String, first_loc: Loc) -> PResult<Vec<VarDecl>> {
        let mut out = Vec::new();
        let (mut name, mut loc) = (first, first_loc);
        loop {
            if self.is_punct("[") {
                return Err(Diagnostic::unsupported(self.loc(), "arrays"));
            }
            let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
            let meta = self.meta(loc);
            out.push(VarDecl { meta, name, id: VarId(0), ty, init });
            if !self.eat_punct(",") {
                return Ok(out);
            }
            if self.is_punct("*") {
                return Err(Diagnostic::unsupported(self.loc(), "pointers"));
            }
            loc = self.loc();
            name = self.ident()?;
        }
    }

    /// Items up to and including the closing brace.
    fn block_items(&mut self, _open: Loc) -> PResult<Vec<Stmt>> {
        let mut items = Vec::new();
        while !self.eat_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.syntax("expected `}`"));
            }
            if self.starts_type() {
                items.extend(self.declaration()?);
            } else {
                items.push(self.stmt()?);
            }
        }
        Ok(items)
    }

    fn declaration(&mut self) -> PResult<Vec<Stmt>> {
        let loc = self.loc();
        let (ty, is_static) = self.decl_type()?;
        if is_static {
            return Err(Diagnostic::unsupported(loc, "static local variables"));
        }
        let ty = ty.ok_or_else(|| Diagnostic::error(loc, "variable declared void"))?;
        let name_loc = self.loc();
        let name = self.ident()?;
        if self.is_punct("(") {
            return Err(Diagnostic::unsupported(loc, "nested function declarations"));
        }
        let decls = self.declarators(ty, name, name_loc)?;
        self.expect(";")?;
        Ok(decls
            .into_iter()
            .map(|d| Stmt::new(Meta { id: self.ids.node(), loc: d.meta.loc }, StmtKind::Decl(d)))
            .collect())
    }

    fn body(&mut self) -> PResult<Stmt> {
        if self.starts_type() {
            return Err(Diagnostic::error(self.loc(), "declaration is not allowed as a statement body"));
        }
        self.stmt()
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        self.check_unsupported_word()?;
        let loc = self.loc();
        if self.eat_punct("{") {
            let items = self.block_items(loc)?;
            let meta = self.meta(loc);
            return Ok(Stmt::new(meta, StmtKind::Block(items)));
        }
        if self.eat_punct(";") {
            let meta = self.meta(loc);
            return Ok(Stmt::new(meta, StmtKind::Block(Vec::new())));
        }
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => String::new(),
        };
        let kind = match kw.as_str() {
            "if" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then = Box::new(self.body()?);
                let els = if self.is_ident("else") {
                    self.bump();
                    Some(Box::new(self.body()?))
                } else {
                    None
                };
                StmtKind::If { cond, then, els }
            }
            "while" => {
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                StmtKind::While { cond, body: Box::new(self.body()?) }
            }
            "do" => {
                self.bump();
                let body = Box::new(self.body()?);
                if !self.is_ident("while") {
                    return Err(self.syntax("expected `while`"));
                }
                self.bump();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                self.expect(";")?;
                StmtKind::DoWhile { body, cond }
            }
            "for" => {
                self.bump();
                self.expect("(")?;
                let init = if self.eat_punct(";") {
                    Vec::new()
                } else if self.starts_type() {
                    self.declaration()?
                } else {
                    let v = self.simple_list()?;
                    self.expect(";")?;
                    v
                };
                let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
                self.expect(";")?;
                let update = if self.is_punct(")") { Vec::new() } else { self.simple_list()? };
                self.expect(")")?;
                StmtKind::For { init, cond, update, body: Box::new(self.body()?) }
            }
            "break" => {
                self.bump();
                self.expect(";")?;
                StmtKind::Break
            }
            "continue" => {
                self.bump();
                self.expect(";")?;
                StmtKind::Continue
            }
            "return" => {
                self.bump();
                let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
                self.expect(";")?;
                StmtKind::Return(value)
            }
            "else" => return Err(self.syntax("`else` without `if`")),
            _ => {
                let s = self.simple()?;
                self.expect(";")?;
                return Ok(s);
            }
        };
        let meta = self.meta(loc);
        Ok(Stmt::new(meta, kind))
    }

    fn simple_list(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![self.simple()?];
        while self.eat_punct(",") {
            out.push(self.simple()?);
        }
        Ok(out)
    }

    /// Assignment, increment, intrinsic statement, or expression statement (no `;`).
    fn simple(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        if self.is_punct("++") || self.is_punct("--") {
            let op = if self.bump() == Tok::Punct("++") { BinOp::Add } else { BinOp::Sub };
            let tloc = self.loc();
            let name = self.ident()?;
            return Ok(self.incdec(loc, tloc, name, op));
        }
        if self.is_punct("*") {
            return Err(Diagnostic::unsupported(loc, "pointer dereference"));
        }
        if let Tok::Ident(name) = self.peek().clone() {
            if !is_keyword(&name) {
                let next = self.peek_at(1).clone();
                if let Tok::Punct(p) = next {
                    if let Some(op) = assign_op(p) {
                        self.bump();
                        self.bump();
                        let value = self.expr()?;
                        let target = placeholder_ref(name);
                        let meta = self.meta(loc);
                        return Ok(Stmt::new(meta, StmtKind::Assign { target, op, value }));
                    }
                    if p == "++" || p == "--" {
                        self.bump();
                        self.bump();
                        let op = if p == "++" { BinOp::Add } else { BinOp::Sub };
                        return Ok(self.incdec(loc, loc, name, op));
                    }
                    if p == "[" {
                        return Err(Diagnostic::unsupported(self.toks[self.pos + 1].loc, "arrays"));
                    }
                    if p == "." || p == "->" {
                        return Err(Diagnostic::unsupported(self.toks[self.pos + 1].loc, "structs"));
                    }
                    if p == "(" && is_intrinsic(&name) && nondet_intrinsic(&name).is_none() {
                        return self.intrinsic_stmt(loc, name);
                    }
                }
            }
        }
        let e = self.expr()?;
        if let Tok::Punct(p) = self.peek() {
            if assign_op(p).is_some() || *p == "++" || *p == "--" {
                return Err(Diagnostic::unsupported(self.loc(), "assignment to a non-variable"));
            }
        }
        let meta = self.meta(loc);
        Ok(Stmt::new(meta, StmtKind::Expr(e)))
    }

    fn incdec(&mut self, loc: Loc, tloc: Loc, name: String, op: BinOp) -> Stmt {
        let one_meta = self.meta(tloc);
        let value = Expr::lit(one_meta, IntType::I32, 1);
        let meta = self.meta(loc);
        Stmt::new(meta, StmtKind::Assign { target: placeholder_ref(name), op: Some(op), value })
    }

    fn intrinsic_stmt(&mut self, loc: Loc, name: String) -> PResult<Stmt> {
        self.bump();
        self.expect("(")?;
        let kind = if name == "printf" {
            let label = match self.peek().clone() {
                Tok::Str(s) => {
                    self.bump();
                    s
                }
                _ => String::new(),
            };
            // remaining arguments are formatting operands with no modeled effect
            while self.eat_punct(",") {
                self.expr()?;
            }
            StmtKind::Noop(label)
        } else {
            let cond = self.expr()?;
            if self.eat_punct(",") {
                match self.bump() {
                    Tok::Str(_) => {}
                    _ => return Err(Diagnostic::error(loc, "expected message string")),
                }
            }
            if ASSERT_NAMES.contains(&name.as_str()) {
                StmtKind::Assert(cond)
            } else {
                StmtKind::Assume(cond)
            }
        };
        self.expect(")")?;
        let meta = self.meta(loc);
        Ok(Stmt::new(meta, kind))
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Punct(p) => match binop(p) {
                    Some(op) => op,
                    None => {
                        if *p == "?" {
                            return Err(Diagnostic::unsupported(self.loc(), "conditional operator"));
                        }
                        if *p == "=" || assign_op(p).is_some() {
                            return Err(Diagnostic::unsupported(self.loc(), "assignment inside an expression"));
                        }
                        break;
                    }
                },
                _ => break,
            };
            if op.precedence() < min_prec {
                break;
            }
            let loc = self.loc();
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            let meta = self.meta(loc);
            lhs = Expr {
                meta,
                ty: IntType::I32,
                kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), op_ty: IntType::I32 },
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let op = match self.peek() {
            Tok::Punct("-") => Some(UnOp::Neg),
            Tok::Punct("!") => Some(UnOp::Not),
            Tok::Punct("~") => Some(UnOp::BitNot),
            Tok::Punct("+") => {
                self.bump();
                return self.unary();
            }
            Tok::Punct("&") => return Err(Diagnostic::unsupported(loc, "address-of operator")),
            Tok::Punct("*") => return Err(Diagnostic::unsupported(loc, "pointer dereference")),
            Tok::Punct("++") | Tok::Punct("--") => {
                return Err(Diagnostic::unsupported(loc, "increment inside an expression"))
            }
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let e = self.unary()?;
            let meta = self.meta(loc);
            return Ok(Expr { meta, ty: IntType::I32, kind: ExprKind::Unary(op, Box::new(e)) });
        }
        if self.is_punct("(") && self.cast_ahead() {
            self.bump();
            let (ty, _) = self.decl_type()?;
            let ty = ty.ok_or_else(|| Diagnostic::unsupported(loc, "cast to void"))?;
            self.expect(")")?;
            let e = self.unary()?;
            let meta = self.meta(loc);
            return Ok(Expr { meta, ty, kind: ExprKind::Cast(Box::new(e)) });
        }
        let e = self.primary()?;
        match self.peek() {
            Tok::Punct("[") => Err(Diagnostic::unsupported(self.loc(), "arrays")),
            Tok::Punct(".") | Tok::Punct("->") => Err(Diagnostic::unsupported(self.loc(), "structs")),
            Tok::Punct("++") | Tok::Punct("--") => {
                Err(Diagnostic::unsupported(self.loc(), "increment inside an expression"))
            }
            _ => Ok(e),
        }
    }

    fn cast_ahead(&self) -> bool {
        match self.peek_at(1) {
            Tok::Ident(s) => {
                TYPE_WORDS.contains(&s.as_str())
                    || QUALIFIERS.contains(&s.as_str())
                    || s == "void"
                    || UNSUPPORTED_TYPES.iter().any(|(w, _)| w == s && *w != "sizeof")
            }
            _ => false,
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let start = self.pos;
        self.check_unsupported_word()?;
        match self.bump() {
            Tok::Int { value, unsigned, long } => {
                let v = value as u64;
                let ty = literal_type(v, unsigned, long);
                let meta = self.meta(loc);
                Ok(Expr::lit(meta, ty, v))
            }
            Tok::Char(c) => {
                let meta = self.meta(loc);
                Ok(Expr::lit(meta, IntType::I32, c as u64))
            }
            Tok::Punct("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(name) if !is_keyword(&name) => {
                if !self.is_punct("(") {
                    let meta = self.meta(loc);
                    return Ok(Expr { meta, ty: IntType::I32, kind: ExprKind::Var(placeholder_ref(name)) });
                }
                self.bump();
                let mut args = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        args.push(self.expr()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect(")")?;
                let meta = self.meta(loc);
                if let Some(ty) = nondet_intrinsic(&name) {
                    if !args.is_empty() {
                        return Err(Diagnostic::error(loc, format!("`{name}` takes no arguments")));
                    }
                    return Ok(Expr { meta, ty, kind: ExprKind::Nondet(name) });
                }
                if is_intrinsic(&name) {
                    return Err(Diagnostic::error(loc, format!("`{name}` may only be used as a statement")));
                }
                Ok(Expr { meta, ty: IntType::I32, kind: ExprKind::Call(name, args) })
            }
            Tok::Str(_) => Err(Diagnostic::unsupported(loc, "string literals outside printf")),
            _ => {
                self.pos = start;
                Err(self.syntax("expected expression"))
            }
        }
    }
}

fn placeholder_ref(name: String) -> VarRef {
    VarRef { name, id: VarId(0), ty: IntType::I32 }
}

pub fn literal_type(v: u64, unsigned: bool, long: bool) -> IntType {
    match (unsigned, long) {
        (false, false) if v <= i32::MAX as u64 => IntType::I32,
        (false, _) if v <= i64::MAX as u64 => IntType::I64,
        (true, false) if v <= u32::MAX as u64 => IntType::U32,
        _ => IntType::U64,
    }
}

fn is_keyword(s: &str) -> bool {
    TYPE_WORDS.contains(&s)
        || QUALIFIERS.contains(&s)
        || matches!(
            s,
            "void" | "if" | "else" | "while" | "do" | "for" | "break" | "continue" | "return" | "goto" | "switch"
                | "case" | "default" | "struct" | "union" | "enum" | "typedef" | "sizeof" | "float" | "double"
        )
}

fn binop(p: &str) -> Option<BinOp> {
    BinOp::ALL.iter().copied().find(|op| op.symbol() == p)
}

/// `=` maps to `Some(None)`, `+=` to `Some(Some(Add))`, others to `None`.
fn assign_op(p: &str) -> Option<Option<BinOp>> {
    if p == "=" {
        return Some(None);
    }
    let base = p.strip_suffix('=')?;
    binop(base).filter(|op| op.compound_assignable()).map(Some)
}
