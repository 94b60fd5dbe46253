//! Parser for relational annotation files (`.rt`).
//!
//! ```text
//! where s = hV / (kv + hV)
//! main :: {l :: list real | Phi} -> {hV :: pos | =} -> {kv :: pos | =}
//!      -> {eps :: pos | =} -> M[epsD(s * eps), 0]{d :: D[real] | =}
//! ```

use std::collections::BTreeMap;

use super::assertion::Assertion;
use super::term::{FIdx, Poly, Side, Term};
use super::types::RelType;
use crate::syntax::{PResult, Parser, SourceSpan, Tok};
use crate::types::SimpleType;

/// A parsed annotation file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RtFile {
    pub decls: Vec<RtDecl>,
    /// `where` definitions, already expanded inside the declarations.
    pub wheres: BTreeMap<String, Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtDecl {
    pub name: String,
    pub ty: RelType,
    pub span: SourceSpan,
}

impl RtFile {
    pub fn get(&self, name: &str) -> Option<&RtDecl> {
        self.decls.iter().find(|d| d.name == name)
    }
}

pub fn parse_rt(text: &str) -> PResult<RtFile> {
    parse_rt_named("<rt>", text)
}

pub fn parse_rt_named(file: &str, text: &str) -> PResult<RtFile> {
    let mut p = RtParser { p: Parser::new(file, text)?, wheres: BTreeMap::new(), fresh: 0 };
    let mut decls = Vec::new();
    while !p.p.at_eof() {
        if p.p.at_ident("where") {
            p.p.bump();
            let name = p.p.expect_ident()?;
            p.p.expect_sym("=")?;
            let t = p.term()?;
            p.wheres.insert(name, t);
            continue;
        }
        let start = p.p.mark();
        let name = p.p.expect_ident()?;
        p.p.expect_sym("::")?;
        let ty = p.rtype()?;
        decls.push(RtDecl { name, ty, span: p.p.span_from(start) });
    }
    Ok(RtFile { decls, wheres: p.wheres })
}

/// Parses a single relational type.
pub fn parse_reltype(text: &str) -> PResult<RelType> {
    let mut p = RtParser { p: Parser::new("<rt>", text)?, wheres: BTreeMap::new(), fresh: 0 };
    let t = p.rtype()?;
    p.p.expect_eof()?;
    Ok(t)
}

/// Parses a single assertion.
pub fn parse_assertion(text: &str) -> PResult<Assertion> {
    let mut p = RtParser { p: Parser::new("<rt>", text)?, wheres: BTreeMap::new(), fresh: 0 };
    let a = p.assertion()?;
    p.p.expect_eof()?;
    Ok(a)
}

struct RtParser {
    p: Parser,
    wheres: BTreeMap<String, Term>,
    fresh: usize,
}

const INDEX_NAMES: &[&str] = &["SD", "HD", "KL", "epsD"];

impl RtParser {
    fn rtype(&mut self) -> PResult<RelType> {
        if self.p.at_sym("(") && matches!(self.p.peek_at(1), Tok::Ident(_)) && matches!(self.p.peek_at(2), Tok::Sym("::")) {
            self.p.bump();
            let var = self.p.expect_ident()?;
            self.p.expect_sym("::")?;
            let dom = self.rtype()?;
            self.p.expect_sym(")")?;
            self.p.expect_sym("->")?;
            let cod = self.rtype()?;
            return Ok(RelType::pi(&var, dom, cod));
        }
        let a = self.rarg()?;
        if self.p.eat_sym("->") {
            let cod = self.rtype()?;
            let var = match &a {
                RelType::Refine { var, .. } => var.clone(),
                _ => {
                    self.fresh += 1;
                    format!("_arg{}", self.fresh)
                }
            };
            return Ok(RelType::pi(&var, a, cod));
        }
        Ok(a)
    }

    fn rarg(&mut self) -> PResult<RelType> {
        if self.p.eat_sym("{") {
            let var = self.p.expect_ident()?;
            self.p.expect_sym("::")?;
            let base = self.rtype()?;
            self.p.expect_sym("|")?;
            let phi = self.refinement(&var)?;
            self.p.expect_sym("}")?;
            return Ok(RelType::refine(&var, base, phi));
        }
        if self.p.at_ident("M") && matches!(self.p.peek_at(1), Tok::Sym("[")) && matches!(self.p.peek_at(2), Tok::Ident(n) if INDEX_NAMES.contains(&n.as_str())) {
            self.p.bump();
            self.p.bump();
            let f = self.fidx()?;
            self.p.expect_sym(",")?;
            let delta = self.term()?;
            self.p.expect_sym("]")?;
            let inner = self.rarg()?;
            return Ok(RelType::monad(f, delta, inner));
        }
        Ok(match self.p.parse_prod_type()? {
            SimpleType::Dist(t) => RelType::Dist(*t),
            t => RelType::Base(t),
        })
    }

    /// `=` and `Phi` abbreviate `x.L = x.R` and `x.L Phi x.R`, optionally conjoined with more.
    fn refinement(&mut self, var: &str) -> PResult<Assertion> {
        let first = if self.p.at_sym("=") && matches!(self.p.peek_at(1), Tok::Sym("}") | Tok::Sym("&&")) {
            self.p.bump();
            Assertion::diag(var)
        } else if self.p.at_ident("Phi") && matches!(self.p.peek_at(1), Tok::Sym("}") | Tok::Sym("&&")) {
            self.p.bump();
            Assertion::Phi(Term::rel(var, Side::L), Term::rel(var, Side::R))
        } else {
            return self.assertion();
        };
        let mut items = vec![first];
        while self.p.eat_sym("&&") {
            items.push(self.unary_assertion()?);
        }
        Ok(Assertion::and(items))
    }

    fn fidx(&mut self) -> PResult<FIdx> {
        let name = self.p.expect_ident()?;
        Ok(match name.as_str() {
            "SD" => FIdx::SD,
            "HD" => FIdx::HD,
            "KL" => FIdx::KL,
            "epsD" => {
                self.p.expect_sym("(")?;
                let t = self.term()?;
                self.p.expect_sym(")")?;
                FIdx::EpsD(Poly::of_term(&t))
            }
            _ => return self.p.error(INDEX_NAMES),
        })
    }

    fn assertion(&mut self) -> PResult<Assertion> {
        let a = self.or_assertion()?;
        if self.p.eat_sym("=>") {
            let b = self.assertion()?;
            return Ok(Assertion::implies(a, b));
        }
        Ok(a)
    }

    fn or_assertion(&mut self) -> PResult<Assertion> {
        let mut items = vec![self.and_assertion()?];
        while self.p.eat_sym("||") {
            items.push(self.and_assertion()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Assertion::Or(items) })
    }

    fn and_assertion(&mut self) -> PResult<Assertion> {
        let mut items = vec![self.unary_assertion()?];
        while self.p.eat_sym("&&") {
            items.push(self.unary_assertion()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Assertion::And(items) })
    }

    fn unary_assertion(&mut self) -> PResult<Assertion> {
        if self.p.eat_kw("not") {
            return Ok(Assertion::Not(Box::new(self.unary_assertion()?)));
        }
        for q in ["forall", "exists"] {
            if self.p.at_ident(q) {
                self.p.bump();
                let x = self.p.expect_ident()?;
                self.p.expect_sym(":")?;
                let t = self.p.parse_prod_type()?;
                self.p.expect_sym(".")?;
                let body = Box::new(self.assertion()?);
                return Ok(if q == "forall" { Assertion::Forall(x, t, body) } else { Assertion::Exists(x, t, body) });
            }
        }
        if self.p.at_ident("Delta") && matches!(self.p.peek_at(1), Tok::Sym("[")) {
            self.p.bump();
            self.p.bump();
            let f = self.fidx()?;
            self.p.expect_sym("]")?;
            self.p.expect_sym("(")?;
            let l = self.term()?;
            self.p.expect_sym(",")?;
            let r = self.term()?;
            self.p.expect_sym(")")?;
            self.p.expect_sym("<=")?;
            let bound = self.term()?;
            return Ok(Assertion::Delta { f, l, r, bound });
        }
        if self.p.at_sym("(") {
            let m = self.p.mark();
            self.p.bump();
            if let Ok(a) = self.assertion() {
                if self.p.eat_sym(")") && !self.at_comparison() {
                    return Ok(a);
                }
            }
            self.p.reset(m);
        }
        let t = self.term()?;
        if self.p.at_ident("Phi") {
            self.p.bump();
            let r = self.term()?;
            return Ok(Assertion::Phi(t, r));
        }
        let op = match self.p.peek() {
            Tok::Sym(s) if ["=", "<>", "<=", "<", ">=", ">"].contains(s) => *s,
            _ => {
                return match t {
                    Term::Bool(true) => Ok(Assertion::True),
                    Term::Bool(false) => Ok(Assertion::False),
                    Term::App(name, args) => Ok(Assertion::Pred(name, args)),
                    _ => self.p.error(&["comparison", "`Phi`"]),
                };
            }
        };
        self.p.bump();
        let r = self.term()?;
        Ok(match op {
            "=" => Assertion::Eq(t, r),
            "<>" => Assertion::Not(Box::new(Assertion::Eq(t, r))),
            "<=" => Assertion::Le(t, r),
            "<" => Assertion::Lt(t, r),
            ">=" => Assertion::Le(r, t),
            _ => Assertion::Lt(r, t),
        })
    }

    fn at_comparison(&self) -> bool {
        matches!(self.p.peek(), Tok::Sym(s) if ["=", "<>", "<=", "<", ">=", ">", "+", "-", "*", "/"].contains(s)) || self.p.at_ident("Phi")
    }

    /// Arguments after `(`; an argument may be a comparison, read as a boolean term.
    fn args(&mut self) -> PResult<Vec<Term>> {
        let mut args = Vec::new();
        if self.p.eat_sym(")") {
            return Ok(args);
        }
        loop {
            let t = self.term()?;
            let t = match self.p.peek() {
                Tok::Sym(op) if ["=", "<>", "<=", "<", ">=", ">"].contains(op) => {
                    let op = op.to_string();
                    self.p.bump();
                    let r = self.term()?;
                    Term::App(op, vec![t, r])
                }
                _ => t,
            };
            args.push(t);
            if !self.p.eat_sym(",") {
                break;
            }
        }
        self.p.expect_sym(")")?;
        Ok(args)
    }

    fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.mul_term()?;
        loop {
            let op = if self.p.eat_sym("+") {
                "+"
            } else if self.p.eat_sym("-") {
                "-"
            } else {
                return Ok(lhs);
            };
            let rhs = self.mul_term()?;
            lhs = Term::app(op, vec![lhs, rhs]);
        }
    }

    fn mul_term(&mut self) -> PResult<Term> {
        let mut lhs = self.unary_term()?;
        loop {
            let op = if self.p.eat_sym("*") {
                "*"
            } else if self.p.eat_sym("/") {
                "/"
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary_term()?;
            lhs = Term::app(op, vec![lhs, rhs]);
        }
    }

    fn unary_term(&mut self) -> PResult<Term> {
        if self.p.eat_sym("-") {
            let t = self.unary_term()?;
            return Ok(match t {
                Term::Num(q) => Term::Num(-q),
                other => Term::app("neg", vec![other]),
            });
        }
        self.atom_term()
    }

    fn atom_term(&mut self) -> PResult<Term> {
        match self.p.peek().clone() {
            Tok::Num(q) => {
                self.p.bump();
                Ok(Term::Num(q))
            }
            Tok::Kw(k) if ["ran", "infer", "return"].contains(&k) && matches!(self.p.peek_at(1), Tok::Sym("(")) => {
                self.p.bump();
                self.p.bump();
                Ok(Term::App(k.to_string(), self.args()?))
            }
            Tok::Kw("true") => {
                self.p.bump();
                Ok(Term::Bool(true))
            }
            Tok::Kw("false") => {
                self.p.bump();
                Ok(Term::Bool(false))
            }
            Tok::Sym("|") => {
                self.p.bump();
                let t = self.term()?;
                self.p.expect_sym("|")?;
                Ok(Term::app("abs", vec![t]))
            }
            Tok::Sym("[") => {
                self.p.bump();
                self.p.expect_sym("]")?;
                Ok(Term::app("nil", vec![]))
            }
            Tok::Sym("(") => {
                self.p.bump();
                if self.p.eat_sym(")") {
                    return Ok(Term::Unit);
                }
                let mut items = vec![self.term()?];
                while self.p.eat_sym(",") {
                    items.push(self.term()?);
                }
                self.p.expect_sym(")")?;
                Ok(if items.len() == 1 { items.pop().unwrap() } else { Term::app("tuple", items) })
            }
            Tok::Ident(name) => {
                self.p.bump();
                if self.p.at_sym(".") && matches!(self.p.peek_at(1), Tok::Ident(s) if s == "L" || s == "R") {
                    self.p.bump();
                    let side = if self.p.at_ident("L") { Side::L } else { Side::R };
                    self.p.bump();
                    return Ok(Term::Rel(name, side));
                }
                let mut name = name;
                while self.p.at_sym(".") && matches!(self.p.peek_at(1), Tok::Ident(_)) && matches!(self.p.peek_at(2), Tok::Sym("(")) {
                    self.p.bump();
                    if let Tok::Ident(s) = self.p.peek().clone() {
                        name = format!("{}.{}", name, s);
                    }
                    self.p.bump();
                }
                if self.p.eat_sym("(") {
                    return Ok(Term::App(name, self.args()?));
                }
                if name == "inf" {
                    return Ok(Term::Inf);
                }
                if let Some(t) = self.wheres.get(&name) {
                    return Ok(t.clone());
                }
                Ok(Term::Var(name))
            }
            _ => self.p.error(&["term"]),
        }
    }
}

/// Numeric value of a closed term built from literals, named constants and arithmetic.
pub fn eval_closed(t: &Term) -> Option<f64> {
    let p = Poly::of_term(t);
    if let Some(q) = p.as_constant() {
        return Some(super::term::q_to_f64(&q));
    }
    let v = p.eval_constants()?;
    if v.is_nan() {
        None
    } else {
        Some(v)
    }
}
