use std::fmt;

use num_rational::BigRational;

use crate::scalar::parse_decimal;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(BigRational),
    /// Reserved word.
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{}`", s),
            Tok::Num(n) => write!(f, "number `{}`", n),
            Tok::Kw(k) => write!(f, "`{}`", k),
            Tok::Sym(s) => write!(f, "`{}`", s),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct LexError {
    pub msg: String,
    pub start: usize,
    pub line: u32,
    pub col: u32,
}

const KW: &[&str] = &[
    "let", "rec", "in", "fun", "match", "with", "if", "then", "else", "mlet", "return", "observe", "infer", "ran", "true", "false", "not",
];

// Longest first so that prefixes do not shadow.
const SYMS: &[&str] = &[
    ";;", "::", "->", "=>", "<=", ">=", "<>", "&&", "||", "(", ")", "[", "]", ",", ";", "=", "<", ">", "+", "-", "*", "/", ":", "|", "_", "^", ".", "{", "}",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut line_start = 0usize;
    let col_of = |i: usize, ls: usize| (src[ls..i].chars().count() + 1) as u32;

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("(*") {
            let (sl, sc) = (line, col_of(i, line_start));
            let mut depth = 0usize;
            loop {
                if i >= bytes.len() {
                    return Err(LexError { msg: "unterminated comment".into(), start: i, line: sl, col: sc });
                }
                if src[i..].starts_with("(*") {
                    depth += 1;
                    i += 2;
                } else if src[i..].starts_with("*)") {
                    depth -= 1;
                    i += 2;
                    if depth == 0 {
                        break;
                    }
                } else {
                    if bytes[i] == b'\n' {
                        line += 1;
                        line_start = i + 1;
                    }
                    i += 1;
                }
            }
            continue;
        }
        let start = i;
        let col = col_of(i, line_start);
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let n = parse_decimal(text).map_err(|e| LexError { msg: e.to_string(), start, line, col })?;
            out.push(Token { tok: Tok::Num(n), start, end: i, line, col });
            continue;
        }
        if c.is_ascii_alphabetic() || (c == b'_' && i + 1 < bytes.len() && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_')) {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'') {
                i += 1;
            }
            let word = &src[start..i];
            let tok = match KW.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word.to_string()),
            };
            out.push(Token { tok, start, end: i, line, col });
            continue;
        }
        match SYMS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                i += s.len();
                out.push(Token { tok: Tok::Sym(s), start, end: i, line, col });
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(LexError { msg: format!("unexpected character `{}`", ch), start, line, col });
            }
        }
    }
    let col = col_of(bytes.len(), line_start);
    out.push(Token { tok: Tok::Eof, start: bytes.len(), end: bytes.len(), line, col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn basic_tokens() {
        let t = toks("mlet x = ran bernoulli(0.5) in return (not x)");
        assert_eq!(t[0], Tok::Kw("mlet"));
        assert_eq!(t[5], Tok::Sym("("));
        assert!(matches!(&t[6], Tok::Num(n) if *n == crate::scalar::ratio(1, 2)));
        assert_eq!(*t.last().unwrap(), Tok::Eof);
    }

    #[test]
    fn comments_and_positions() {
        let ts = tokenize("(* a (* nested *) comment *)\n  x :: xs # tail\n").unwrap();
        assert_eq!(ts[0].tok, Tok::Ident("x".into()));
        assert_eq!((ts[0].line, ts[0].col), (2, 3));
        assert_eq!(ts[1].tok, Tok::Sym("::"));
        assert_eq!(ts.len(), 4);
    }

    #[test]
    fn numbers_with_exponent() {
        assert!(matches!(&toks("1e-3")[0], Tok::Num(n) if *n == crate::scalar::ratio(1, 1000)));
        // `1.` is not a number followed by a fraction
        assert_eq!(toks("x.L").len(), 4);
    }

    #[test]
    fn bad_character() {
        assert!(tokenize("let x = $").is_err());
        assert!(tokenize("(* open").is_err());
    }
}
