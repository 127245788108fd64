use super::ast::Loc;
use super::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Integer literal: value plus `u`/`l` suffix flags.
    Int { value: u128, unsigned: bool, long: bool },
    Char(u8),
    /// String literal contents exactly as written between the quotes.
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

const PUNCTS: [&str; 46] = [
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "(", ")", "{", "}", "[", "]", ";", ",", "+", "-",
    "*", "/", "%", "<", ">", "=", "!", "~", "&", "|", "^", "?", ":", ".",
];

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut at_line_start = true;

    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }

    while i < bytes.len() {
        let c = bytes[i];
        let loc = Loc { line, col };
        if c == b'\n' {
            at_line_start = true;
            advance!(1);
            continue;
        }
        if c.is_ascii_whitespace() {
            advance!(1);
            continue;
        }
        // preprocessor lines pass through untouched
        if c == b'#' && at_line_start {
            while i < bytes.len() && bytes[i] != b'\n' {
                advance!(1);
            }
            continue;
        }
        at_line_start = false;
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                advance!(1);
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            match src[i + 2..].find("*/") {
                Some(end) => advance!(end + 4),
                None => return Err(Diagnostic::error(loc, "unterminated comment")),
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                advance!(1);
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), loc });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                advance!(1);
            }
            out.push(Token { tok: lex_number(&src[start..i], loc)?, loc });
            continue;
        }
        if c == b'\'' {
            let (value, len) = lex_char(&bytes[i..], loc)?;
            advance!(len);
            out.push(Token { tok: Tok::Char(value), loc });
            continue;
        }
        if c == b'"' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j] != b'"' {
                if bytes[j] == b'\\' {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'\n' {
                    return Err(Diagnostic::error(loc, "unterminated string literal"));
                }
                j += 1;
            }
            if j >= bytes.len() {
                return Err(Diagnostic::error(loc, "unterminated string literal"));
            }
            let text = src[i + 1..j].to_string();
            advance!(j + 1 - i);
            out.push(Token { tok: Tok::Str(text), loc });
            continue;
        }
        match PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            Some(p) => {
                advance!(p.len());
                out.push(Token { tok: Tok::Punct(p), loc });
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(Diagnostic::error(loc, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, loc: Loc { line, col } });
    Ok(out)
}

fn lex_number(text: &str, loc: Loc) -> Result<Tok, Diagnostic> {
    let lower = text.to_ascii_lowercase();
    let digits_end = lower.trim_end_matches(['u', 'l']).len();
    let (digits, suffix) = lower.split_at(digits_end);
    let unsigned = suffix.contains('u');
    let long = suffix.contains('l');
    if suffix.matches('u').count() > 1 || suffix.matches('l').count() > 2 {
        return Err(Diagnostic::error(loc, format!("invalid integer suffix in `{text}`")));
    }
    if digits.contains('.') || (digits.contains('e') && !digits.starts_with("0x")) {
        return Err(Diagnostic::unsupported(loc, "floating-point literal"));
    }
    let parsed = if let Some(hex) = digits.strip_prefix("0x") {
        u128::from_str_radix(hex, 16)
    } else if digits.len() > 1 && digits.starts_with('0') {
        u128::from_str_radix(&digits[1..], 8)
    } else {
        digits.parse::<u128>()
    };
    match parsed {
        Ok(value) if value <= u64::MAX as u128 => Ok(Tok::Int { value, unsigned, long }),
        Ok(_) => Err(Diagnostic::error(loc, format!("integer literal `{text}` too large"))),
        Err(_) => Err(Diagnostic::error(loc, format!("invalid integer literal `{text}`"))),
    }
}

fn lex_char(b: &[u8], loc: Loc) -> Result<(u8, usize), Diagnostic> {
    let bad = || Diagnostic::error(loc, "invalid character literal");
    match b.get(1) {
        Some(b'\\') => {
            let v = match b.get(2).ok_or_else(bad)? {
                b'n' => b'\n',
                b't' => b'\t',
                b'r' => b'\r',
                b'0' => 0,
                b'\\' => b'\\',
                b'\'' => b'\'',
                b'"' => b'"',
                _ => return Err(bad()),
            };
            (b.get(3) == Some(&b'\'')).then_some((v, 4)).ok_or_else(bad)
        }
        Some(&c) if c != b'\'' && b.get(2) == Some(&b'\'') => Ok((c, 3)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn basic_tokens() {
        let t = toks("int x = 0x1fU; // c\n#include <x>\n x <<= 'a';");
        assert_eq!(t[0], Tok::Ident("int".into()));
        assert_eq!(t[3], Tok::Int { value: 31, unsigned: true, long: false });
        assert_eq!(t[6], Tok::Punct("<<="));
        assert_eq!(t[7], Tok::Char(b'a'));
    }

    #[test]
    fn locations_and_errors() {
        let t = lex("a\n  /* x\n */ b").unwrap();
        assert_eq!(t[1].loc, Loc { line: 3, col: 5 });
        assert!(lex("x @ y").is_err());
        assert!(lex("1.5").is_err());
        assert!(lex("\"abc").is_err());
    }
}
