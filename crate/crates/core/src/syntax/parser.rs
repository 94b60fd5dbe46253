use std::sync::Arc;

use num_traits::{Signed, ToPrimitive, Zero};

use super::ast::{is_reserved, Arm, BinOp, Expr, ExprKind, Lit, Param, Pattern, Prim, UnOp};
use super::lexer::{tokenize, Tok, Token};
use super::span::SourceSpan;
use crate::types::SimpleType;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{span}: syntax error: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

pub type PResult<T> = Result<T, ParseError>;

/// Parse a whole program (a single expression or a chain of top-level declarations).
pub fn parse(text: &str) -> PResult<Expr> {
    parse_named("<input>", text)
}

pub fn parse_named(file: &str, text: &str) -> PResult<Expr> {
    let mut p = Parser::new(file, text)?;
    let e = p.parse_expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parse a simple type such as `list bool -> M[D[[0,1]]]`.
pub fn parse_type(text: &str) -> PResult<SimpleType> {
    let mut p = Parser::new("<type>", text)?;
    let t = p.parse_type()?;
    p.expect_eof()?;
    Ok(t)
}

const EXPR_START: &[&str] = &["expression"];

/// Recursive-descent parser over a token vector.
pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: Arc<str>,
    last_end: usize,
    decl_names: Vec<String>,
}

impl Parser {
    pub fn new(file: &str, text: &str) -> PResult<Self> {
        let file: Arc<str> = Arc::from(file);
        let toks = tokenize(text).map_err(|e| ParseError {
            span: SourceSpan::new(file.clone(), e.start, e.start, e.line, e.col),
            expected: vec!["a valid token".into()],
            found: e.msg,
        })?;
        Ok(Parser { toks, pos: 0, file, last_end: 0, decl_names: Vec::new() })
    }

    // ---- token plumbing ----

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        self.last_end = t.end;
        t
    }

    pub fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    pub fn at_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == k)
    }

    pub fn at_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == name)
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, k: &str) -> bool {
        if self.at_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn token_span(&self) -> SourceSpan {
        let t = &self.toks[self.pos];
        SourceSpan::new(self.file.clone(), t.start, t.end, t.line, t.col)
    }

    /// Span from the token at index `start` to the last consumed token.
    pub fn span_from(&self, start: usize) -> SourceSpan {
        let t = &self.toks[start];
        SourceSpan::new(self.file.clone(), t.start, self.last_end.max(t.start), t.line, t.col)
    }

    pub fn mark(&self) -> usize {
        self.pos
    }

    /// Backtracks to a position returned by [`Parser::mark`].
    pub fn reset(&mut self, mark: usize) {
        self.pos = mark;
        self.last_end = if mark == 0 { 0 } else { self.toks[mark - 1].end };
    }

    pub fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError {
            span: self.token_span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        })
    }

    pub fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(&[&format!("`{}`", s)])
        }
    }

    pub fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.error(&[&format!("`{}`", k)])
        }
    }

    pub fn expect_eof(&mut self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error(&["end of input"])
        }
    }

    pub fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.bump();
                Ok(x)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn expect_var_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(x) if !is_reserved(&x) => {
                self.bump();
                Ok(x)
            }
            _ => self.error(&["variable name"]),
        }
    }

    pub fn expect_num(&mut self) -> PResult<num_rational::BigRational> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.error(&["number"]),
        }
    }

    fn mk(&self, start: usize, kind: ExprKind) -> Expr {
        Expr::new(kind, self.span_from(start))
    }

    // ---- types ----

    pub fn parse_type(&mut self) -> PResult<SimpleType> {
        let a = self.parse_prod_type()?;
        if self.eat_sym("->") {
            let b = self.parse_type()?;
            Ok(SimpleType::arrow(a, b))
        } else {
            Ok(a)
        }
    }

    pub fn parse_prod_type(&mut self) -> PResult<SimpleType> {
        let first = self.parse_app_type()?;
        if !self.at_sym("*") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_sym("*") {
            items.push(self.parse_app_type()?);
        }
        Ok(SimpleType::Tuple(items))
    }

    fn parse_app_type(&mut self) -> PResult<SimpleType> {
        if self.at_ident("list") {
            self.bump();
            return Ok(SimpleType::list(self.parse_app_type()?));
        }
        self.parse_atom_type()
    }

    fn parse_atom_type(&mut self) -> PResult<SimpleType> {
        const EXPECTED: &[&str] = &["type"];
        match self.peek().clone() {
            Tok::Ident(name) => {
                let t = match name.as_str() {
                    "unit" => SimpleType::Unit,
                    "bool" => SimpleType::Bool,
                    "nat" => SimpleType::Nat,
                    "real" | "R" => SimpleType::Real,
                    "pos" => SimpleType::PosReal,
                    "extpos" => SimpleType::ExtPosReal,
                    "M" | "D" => {
                        self.bump();
                        self.expect_sym("[")?;
                        let inner = self.parse_type()?;
                        self.expect_sym("]")?;
                        return Ok(if name == "M" { SimpleType::monad(inner) } else { SimpleType::dist(inner) });
                    }
                    _ => return self.error(EXPECTED),
                };
                self.bump();
                Ok(t)
            }
            Tok::Sym("[") => {
                self.bump();
                let n = self.expect_num()?;
                if self.eat_sym(",") {
                    let one = self.expect_num()?;
                    if !n.is_zero() || one != num_rational::BigRational::from_integer(1.into()) {
                        return self.error(&["`[0,1]`"]);
                    }
                    self.expect_sym("]")?;
                    if self.eat_sym("^") {
                        let k = self.small_nat()?;
                        return Ok(SimpleType::unit_cube(k as usize));
                    }
                    return Ok(SimpleType::UnitInterval);
                }
                self.expect_sym("]")?;
                let k = n.to_integer().to_u32().filter(|k| *k >= 1 && n.is_integer());
                match k {
                    Some(k) => Ok(SimpleType::Enum(k)),
                    None => self.error(&["positive integer"]),
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.parse_type()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => self.error(EXPECTED),
        }
    }

    fn small_nat(&mut self) -> PResult<u32> {
        let n = self.expect_num()?;
        match n.to_integer().to_u32() {
            Some(k) if n.is_integer() && k >= 1 => Ok(k),
            _ => self.error(&["positive integer"]),
        }
    }

    // ---- patterns and binders ----

    fn parse_pattern(&mut self) -> PResult<Pattern> {
        let head = self.parse_atom_pattern()?;
        if self.eat_sym("::") {
            let tail = self.parse_pattern()?;
            Ok(Pattern::Cons(Box::new(head), Box::new(tail)))
        } else {
            Ok(head)
        }
    }

    fn parse_atom_pattern(&mut self) -> PResult<Pattern> {
        match self.peek().clone() {
            Tok::Sym("_") => {
                self.bump();
                Ok(Pattern::Wild)
            }
            Tok::Ident(_) => Ok(Pattern::Var(self.expect_var_name()?)),
            Tok::Kw("true") => {
                self.bump();
                Ok(Pattern::Lit(Lit::Bool(true)))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Pattern::Lit(Lit::Bool(false)))
            }
            Tok::Num(n) => {
                self.bump();
                Ok(Pattern::Lit(Lit::Num(n)))
            }
            Tok::Sym("-") if matches!(self.peek_at(1), Tok::Num(_)) => {
                self.bump();
                let n = self.expect_num()?;
                Ok(Pattern::Lit(Lit::Num(-n)))
            }
            Tok::Sym("[") => {
                self.bump();
                self.expect_sym("]")?;
                Ok(Pattern::Nil)
            }
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    return Ok(Pattern::Lit(Lit::Unit));
                }
                let first = self.parse_pattern()?;
                if self.eat_sym(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_sym(",") {
                    items.push(self.parse_pattern()?);
                }
                self.expect_sym(")")?;
                Ok(Pattern::Tuple(items))
            }
            _ => self.error(&["pattern"]),
        }
    }

    /// `x`, `_`, `(x : T)`, `(p1, p2)`.
    fn parse_param(&mut self) -> PResult<Param> {
        if self.at_sym("(") && matches!(self.peek_at(1), Tok::Ident(_)) && matches!(self.peek_at(2), Tok::Sym(":")) {
            self.bump();
            let name = self.expect_var_name()?;
            self.expect_sym(":")?;
            let ty = self.parse_type()?;
            self.expect_sym(")")?;
            return Ok(Param { pat: Pattern::Var(name), ty: Some(ty) });
        }
        let pat = self.parse_atom_pattern()?;
        match pat {
            Pattern::Var(_) | Pattern::Wild | Pattern::Tuple(_) | Pattern::Lit(Lit::Unit) => Ok(Param { pat, ty: None }),
            _ => self.error(&["binder"]),
        }
    }

    fn at_param_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(x) => !is_reserved(x),
            Tok::Sym("_") | Tok::Sym("(") => true,
            _ => false,
        }
    }

    fn parse_params(&mut self) -> PResult<Vec<Param>> {
        let mut ps = Vec::new();
        while self.at_param_start() {
            ps.push(self.parse_param()?);
        }
        Ok(ps)
    }

    // ---- expressions ----

    pub fn parse_expr(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Kw("let") => self.parse_let(),
            Tok::Kw("fun") => self.parse_fun(),
            Tok::Kw("match") => self.parse_match(),
            Tok::Kw("if") => self.parse_if(),
            Tok::Kw("mlet") => self.parse_mlet(),
            Tok::Kw("observe") => self.parse_observe(),
            _ => self.parse_binary(1),
        }
    }

    fn lams(params: Vec<Param>, body: Expr, span: SourceSpan) -> Expr {
        params.into_iter().rev().fold(body, |acc, p| Expr::new(ExprKind::Lam(p, Box::new(acc)), span.clone()))
    }

    fn parse_let(&mut self) -> PResult<Expr> {
        let start = self.mark();
        self.expect_kw("let")?;
        let recursive = self.eat_kw("rec");
        let name_span = self.token_span();
        let (binder, params) = if recursive {
            let name = self.expect_var_name()?;
            let params = self.parse_params()?;
            if params.is_empty() {
                return self.error(&["parameter"]);
            }
            (Param::var(&name), params)
        } else if matches!(self.peek(), Tok::Ident(_)) && !matches!(self.peek_at(1), Tok::Sym("=")) {
            let name = self.expect_var_name()?;
            (Param::var(&name), self.parse_params()?)
        } else {
            (self.parse_param()?, Vec::new())
        };
        self.expect_sym("=")?;
        let bstart = self.mark();
        let mut bound = self.parse_expr()?;
        if !recursive && !params.is_empty() {
            let sp = self.span_from(bstart);
            bound = Self::lams(params.clone(), bound, sp);
        }
        let mut names = Vec::new();
        binder.pat.binders(&mut names);

        let rest = if self.eat_kw("in") {
            self.parse_expr()?
        } else if self.at_eof() || self.at_sym(";;") || self.at_kw("let") {
            // top-level declaration
            self.decl_names.extend(names.iter().cloned());
            self.eat_sym(";;");
            if self.at_eof() {
                let entry = if self.decl_names.iter().any(|n| n == "main") {
                    "main".to_string()
                } else {
                    names.first().cloned().unwrap_or_else(|| "main".into())
                };
                Expr::new(ExprKind::Var(entry), name_span)
            } else {
                self.parse_expr()?
            }
        } else {
            return self.error(&["`in`"]);
        };

        let kind = if recursive {
            ExprKind::LetRec { name: names[0].clone(), params, body: Box::new(bound), rest: Box::new(rest) }
        } else {
            ExprKind::Let(binder, Box::new(bound), Box::new(rest))
        };
        Ok(self.mk(start, kind))
    }

    fn parse_fun(&mut self) -> PResult<Expr> {
        let start = self.mark();
        self.expect_kw("fun")?;
        let params = self.parse_params()?;
        if params.is_empty() {
            return self.error(&["parameter"]);
        }
        self.expect_sym("->")?;
        let body = self.parse_expr()?;
        Ok(Self::lams(params, body, self.span_from(start)))
    }

    fn parse_match(&mut self) -> PResult<Expr> {
        let start = self.mark();
        self.expect_kw("match")?;
        let scrut = self.parse_expr()?;
        self.expect_kw("with")?;
        self.eat_sym("|");
        let mut arms = Vec::new();
        loop {
            let pat = self.parse_pattern()?;
            self.expect_sym("->")?;
            let body = self.parse_expr()?;
            arms.push(Arm { pat, body });
            if !self.eat_sym("|") {
                break;
            }
        }
        Ok(self.mk(start, ExprKind::Match(Box::new(scrut), arms)))
    }

    fn parse_if(&mut self) -> PResult<Expr> {
        let start = self.mark();
        self.expect_kw("if")?;
        let c = self.parse_expr()?;
        self.expect_kw("then")?;
        let a = self.parse_expr()?;
        self.expect_kw("else")?;
        let b = self.parse_expr()?;
        Ok(self.mk(start, ExprKind::If(Box::new(c), Box::new(a), Box::new(b))))
    }

    fn parse_mlet(&mut self) -> PResult<Expr> {
        let start = self.mark();
        self.expect_kw("mlet")?;
        let binder = self.parse_param()?;
        self.expect_sym("=")?;
        let head = self.parse_expr()?;
        self.expect_kw("in")?;
        let body = self.parse_expr()?;
        Ok(self.mk(start, ExprKind::MLet(binder, Box::new(head), Box::new(body))))
    }

    fn parse_observe(&mut self) -> PResult<Expr> {
        let start = self.mark();
        self.expect_kw("observe")?;
        if self.at_sym("(") && matches!(self.peek_at(1), Tok::Kw("fun")) {
            // observe (fun x -> e) e'
            self.bump();
            self.expect_kw("fun")?;
            let mut params = self.parse_params()?;
            if params.is_empty() {
                return self.error(&["parameter"]);
            }
            self.expect_sym("->")?;
            let pred = self.parse_expr()?;
            self.expect_sym(")")?;
            let prior = self.parse_app()?;
            let binder = if params.len() == 1 {
                params.pop().unwrap()
            } else if params.iter().all(|p| p.ty.is_none()) {
                Param { pat: Pattern::Tuple(params.into_iter().map(|p| p.pat).collect()), ty: None }
            } else {
                return self.error(&["untyped binders"]);
            };
            return Ok(self.mk(start, ExprKind::Observe { binder, pred: Box::new(pred), prior: Box::new(prior) }));
        }
        let binder = self.parse_param()?;
        self.expect_sym("=>")?;
        let pred = self.parse_expr()?;
        self.expect_kw("in")?;
        let prior = self.parse_expr()?;
        Ok(self.mk(start, ExprKind::Observe { binder, pred: Box::new(pred), prior: Box::new(prior) }))
    }

    fn binop_at(&self) -> Option<BinOp> {
        let op = match self.peek() {
            Tok::Sym("||") => BinOp::Or,
            Tok::Sym("&&") => BinOp::And,
            Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("<>") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Sym("+") => BinOp::Add,
            Tok::Sym("-") => BinOp::Sub,
            Tok::Sym("*") => BinOp::Mul,
            Tok::Sym("/") => BinOp::Div,
            _ => return None,
        };
        Some(op)
    }

    /// Precedence climbing. Level 4 is `::`, handled separately (right associative).
    fn parse_binary(&mut self, level: u8) -> PResult<Expr> {
        if level == 4 {
            return self.parse_cons();
        }
        if level > 6 {
            return self.parse_unary();
        }
        let start = self.mark();
        let mut lhs = self.parse_binary(level + 1)?;
        while let Some(op) = self.binop_at() {
            if op.precedence() != level {
                break;
            }
            self.bump();
            let rhs = self.parse_binary(level + 1)?;
            lhs = self.mk(start, ExprKind::BinOp(op, Box::new(lhs), Box::new(rhs)));
            if op.is_comparison() {
                if self.binop_at().map(|o| o.is_comparison()).unwrap_or(false) {
                    return self.error(&["parentheses around chained comparison"]);
                }
                break;
            }
        }
        Ok(lhs)
    }

    fn parse_cons(&mut self) -> PResult<Expr> {
        let start = self.mark();
        let head = self.parse_binary(5)?;
        if self.eat_sym("::") {
            let tail = self.parse_cons()?;
            Ok(self.mk(start, ExprKind::Cons(Box::new(head), Box::new(tail))))
        } else {
            Ok(head)
        }
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        let start = self.mark();
        let wrap = |p: &mut Self, k: fn(Box<Expr>) -> ExprKind| -> PResult<Expr> {
            p.bump();
            let e = p.parse_unary()?;
            Ok(p.mk(start, k(Box::new(e))))
        };
        match self.peek() {
            Tok::Sym("-") => {
                self.bump();
                let e = self.parse_unary()?;
                if let ExprKind::Lit(Lit::Num(n)) = &e.kind {
                    if n.is_positive() || n.is_zero() {
                        let n = -n.clone();
                        return Ok(self.mk(start, ExprKind::Lit(Lit::Num(n))));
                    }
                }
                Ok(self.mk(start, ExprKind::UnOp(UnOp::Neg, Box::new(e))))
            }
            Tok::Kw("not") => wrap(self, |e| ExprKind::UnOp(UnOp::Not, e)),
            Tok::Kw("return") => wrap(self, ExprKind::Return),
            Tok::Kw("infer") => wrap(self, ExprKind::Infer),
            Tok::Kw("ran") => wrap(self, ExprKind::Ran),
            _ => self.parse_app(),
        }
    }

    fn at_atom_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(_) | Tok::Num(_) => true,
            Tok::Kw("true") | Tok::Kw("false") => true,
            Tok::Sym("(") | Tok::Sym("[") => true,
            _ => false,
        }
    }

    fn parse_app(&mut self) -> PResult<Expr> {
        let start = self.mark();
        let mut f = self.parse_atom()?;
        while self.at_atom_start() {
            let a = self.parse_atom()?;
            f = self.mk(start, ExprKind::App(Box::new(f), Box::new(a)));
        }
        Ok(f)
    }

    fn parse_atom(&mut self) -> PResult<Expr> {
        let start = self.mark();
        match self.peek().clone() {
            Tok::Ident(x) => {
                if let Some(p) = Prim::from_name(&x) {
                    return self.parse_prim(p);
                }
                self.bump();
                Ok(self.mk(start, ExprKind::Var(x)))
            }
            Tok::Num(n) => {
                self.bump();
                Ok(self.mk(start, ExprKind::Lit(Lit::Num(n))))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(self.mk(start, ExprKind::Lit(Lit::Bool(true))))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(self.mk(start, ExprKind::Lit(Lit::Bool(false))))
            }
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    return Ok(self.mk(start, ExprKind::Lit(Lit::Unit)));
                }
                let first = self.parse_expr()?;
                if self.eat_sym(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_sym(",") {
                    items.push(self.parse_expr()?);
                }
                self.expect_sym(")")?;
                Ok(self.mk(start, ExprKind::Tuple(items)))
            }
            Tok::Sym("[") => {
                self.bump();
                let mut items = Vec::new();
                if !self.at_sym("]") {
                    items.push(self.parse_expr()?);
                    while self.eat_sym(";") {
                        items.push(self.parse_expr()?);
                    }
                }
                self.expect_sym("]")?;
                let close = &self.toks[self.pos - 1];
                let end = close.end;
                let nil_span = SourceSpan::new(self.file.clone(), close.start, close.end, close.line, close.col);
                let mut acc = Expr::new(ExprKind::Nil, if self.toks[start].end == close.start { self.span_from(start) } else { nil_span });
                for e in items.into_iter().rev() {
                    let s = &e.span;
                    let sp = SourceSpan::new(self.file.clone(), s.start, end, s.line, s.col);
                    acc = Expr::new(ExprKind::Cons(Box::new(e), Box::new(acc)), sp);
                }
                // the outermost node covers the brackets
                acc.span = self.span_from(start);
                Ok(acc)
            }
            _ => self.error(EXPR_START),
        }
    }

    fn parse_prim(&mut self, p: Prim) -> PResult<Expr> {
        let start = self.mark();
        self.bump();
        let (lo, hi) = p.arity();
        let mut args = Vec::new();
        if self.at_sym("(") {
            if matches!(self.peek_at(1), Tok::Sym(")")) {
                self.bump();
                self.bump();
            } else {
                self.bump();
                args.push(self.parse_expr()?);
                while self.eat_sym(",") {
                    args.push(self.parse_expr()?);
                }
                self.expect_sym(")")?;
            }
            if args.len() > 1 || args.len() >= lo {
                if args.len() < lo || args.len() > hi {
                    return self.arity_error(p, start);
                }
                return Ok(self.mk(start, ExprKind::Prim(p, args)));
            }
        }
        while args.len() < hi && self.at_atom_start() {
            args.push(self.parse_atom()?);
        }
        if args.len() < lo {
            return self.arity_error(p, start);
        }
        Ok(self.mk(start, ExprKind::Prim(p, args)))
    }

    fn arity_error<T>(&self, p: Prim, _start: usize) -> PResult<T> {
        let (lo, hi) = p.arity();
        let want = if lo == hi { format!("{} argument(s) for `{}`", lo, p) } else { format!("{}..{} arguments for `{}`", lo, hi, p) };
        self.error(&[&want])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn k(e: &Expr) -> &ExprKind {
        &e.kind
    }

    #[test]
    fn return_true() {
        let e = parse("return true").unwrap();
        assert_eq!(*k(&e), ExprKind::Return(Box::new(Expr::boolean(true))));
    }

    #[test]
    fn observe_sugar_is_binder_form() {
        let e = parse("infer ( observe (fun r -> bernoulli(r) = obs) beta(a,b) )").unwrap();
        let ExprKind::Infer(inner) = k(&e) else { panic!("{:?}", e) };
        let ExprKind::Observe { binder, pred, prior } = k(inner) else { panic!() };
        assert_eq!(binder.name(), Some("r"));
        assert!(matches!(k(pred), ExprKind::BinOp(BinOp::Eq, ..)));
        assert_eq!(*k(prior), ExprKind::Prim(Prim::Beta, vec![Expr::var("a"), Expr::var("b")]));
        let direct = parse("infer (observe r => bernoulli(r) = obs in beta(a, b))").unwrap();
        assert_eq!(e, direct);
    }

    #[test]
    fn empty_bind_head() {
        let err = parse("mlet x = in return x").unwrap_err();
        assert_eq!(err.found, "`in`");
        assert_eq!(err.span.col, 10);
        assert!(err.expected.contains(&"expression".to_string()));
    }

    #[test]
    fn prim_call_forms() {
        let a = parse("gaussMech (gaussSigma eps delta) y").unwrap();
        let b = parse("gaussMech(gaussSigma(eps, delta), y)").unwrap();
        assert_eq!(a, b);
        let c = parse("expMech eps score (obs, prior)").unwrap();
        let ExprKind::Prim(Prim::ExpMech, args) = k(&c) else { panic!() };
        assert!(matches!(k(&args[2]), ExprKind::Tuple(_)));
        assert!(parse("beta(1)").is_err());
        assert_eq!(*k(&parse("uniform()").unwrap()), ExprKind::Prim(Prim::Uniform, vec![]));
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(*k(&parse("-0.5").unwrap()), ExprKind::Lit(Lit::Num(ratio(-1, 2))));
        assert!(matches!(k(&parse("-(x)").unwrap()), ExprKind::UnOp(UnOp::Neg, _)));
        assert!(matches!(k(&parse("x - 1").unwrap()), ExprKind::BinOp(BinOp::Sub, ..)));
    }

    #[test]
    fn precedence() {
        let e = parse("a + b * c = d :: e").unwrap();
        let ExprKind::BinOp(BinOp::Eq, l, r) = k(&e) else { panic!() };
        assert!(matches!(k(l), ExprKind::BinOp(BinOp::Add, ..)));
        assert!(matches!(k(r), ExprKind::Cons(..)));
        assert!(parse("a < b < c").is_err());
    }

    #[test]
    fn declarations_chain_to_main() {
        let src = "let rec f x = x\nlet main y = f y\nlet helper = 3\n";
        let e = parse(src).unwrap();
        let ExprKind::LetRec { rest, .. } = k(&e) else { panic!() };
        let ExprKind::Let(_, _, rest2) = k(rest) else { panic!() };
        let ExprKind::Let(_, _, body) = k(rest2) else { panic!() };
        assert_eq!(*k(body), ExprKind::Var("main".into()));
        assert!(e.spans_monotone());
    }

    #[test]
    fn list_literal_sugar() {
        assert_eq!(parse("[1; 2]").unwrap(), parse("1 :: 2 :: []").unwrap());
        assert!(parse("[1; 2]").unwrap().spans_monotone());
    }

    #[test]
    fn types() {
        assert_eq!(parse_type("list bool -> M[D[[0,1]]]").unwrap().to_string(), "list bool -> M[D[[0,1]]]");
        assert_eq!(parse_type("list [3]").unwrap(), SimpleType::list(SimpleType::Enum(3)));
        assert_eq!(parse_type("[0,1]^2").unwrap(), SimpleType::unit_cube(2));
        assert_eq!(parse_type("real * pos").unwrap(), SimpleType::Tuple(vec![SimpleType::Real, SimpleType::PosReal]));
        assert!(parse_type("[0,2]").is_err());
    }

    #[test]
    fn observe_multi_binder() {
        let e = parse("observe (fun r s -> return true) p").unwrap();
        let ExprKind::Observe { binder, .. } = k(&e) else { panic!() };
        assert_eq!(binder.pat, Pattern::Tuple(vec![Pattern::var("r"), Pattern::var("s")]));
    }
}
