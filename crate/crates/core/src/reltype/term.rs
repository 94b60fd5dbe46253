//! Relational terms, index polynomials and monad indices.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dist::FDivKind;
use crate::scalar::{rational_to_decimal, rational_to_f64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

impl Side {
    pub fn suffix(self) -> &'static str {
        match self {
            Side::L => "L",
            Side::R => "R",
        }
    }
}

/// First-order image of a program expression on one side of a relational judgement.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    /// Left or right instance of a relational variable.
    Rel(String, Side),
    /// A name denoting the same value on both sides.
    Var(String),
    Num(BigRational),
    Bool(bool),
    Unit,
    Inf,
    App(String, Vec<Term>),
    Lam(Vec<String>, Box<Term>),
}

/// Value of a named lemma-library constant.
pub fn named_constant(name: &str) -> Option<f64> {
    let q = 1.0 - std::f64::consts::PI / 4.0;
    match name {
        "rho" => Some(q.sqrt()),
        "zeta" => Some((2.0 * q).sqrt()),
        _ => None,
    }
}

impl Term {
    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(f.to_string(), args)
    }

    pub fn int(n: i64) -> Term {
        Term::Num(BigRational::from_integer(n.into()))
    }

    pub fn var(x: &str) -> Term {
        Term::Var(x.to_string())
    }

    pub fn rel(x: &str, s: Side) -> Term {
        Term::Rel(x.to_string(), s)
    }

    pub fn is_var_like(&self) -> bool {
        matches!(self, Term::Rel(..) | Term::Var(_))
    }

    /// Bottom-up rewrite.
    pub fn map(&self, f: &mut dyn FnMut(Term) -> Term) -> Term {
        let t = match self {
            Term::App(g, args) => Term::App(g.clone(), args.iter().map(|a| a.map(f)).collect()),
            Term::Lam(xs, b) => Term::Lam(xs.clone(), Box::new(b.map(f))),
            other => other.clone(),
        };
        f(t)
    }

    /// Replaces free occurrences of relational and plain variables.
    pub fn subst(&self, s: &dyn Fn(&Term) -> Option<Term>) -> Term {
        match self {
            Term::Lam(xs, b) => {
                let inner = |t: &Term| match t {
                    Term::Var(x) if xs.contains(x) => None,
                    _ => s(t),
                };
                Term::Lam(xs.clone(), Box::new(b.subst(&inner)))
            }
            Term::App(g, args) => Term::App(g.clone(), args.iter().map(|a| a.subst(s)).collect()),
            other => s(other).unwrap_or_else(|| other.clone()),
        }
    }

    /// Renames a relational variable (both instances and its plain name).
    pub fn rename(&self, from: &str, to: &str) -> Term {
        self.subst(&|t| match t {
            Term::Rel(x, s) if x == from => Some(Term::Rel(to.to_string(), *s)),
            Term::Var(x) if x == from => Some(Term::Var(to.to_string())),
            _ => None,
        })
    }

    pub fn mentions_rel(&self) -> bool {
        match self {
            Term::Rel(..) => true,
            Term::App(_, a) => a.iter().any(Term::mentions_rel),
            Term::Lam(_, b) => b.mentions_rel(),
            _ => false,
        }
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self {
            Term::Num(q) => Some(q),
            _ => None,
        }
    }
}

fn infix(op: &str) -> Option<u8> {
    match op {
        "||" => Some(1),
        "&&" => Some(2),
        "=" | "<>" | "<" | "<=" | ">" | ">=" => Some(3),
        "::" => Some(4),
        "+" | "-" => Some(5),
        "*" | "/" => Some(6),
        _ => None,
    }
}

impl Term {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        match self {
            Term::Rel(x, s) => write!(f, "{}.{}", x, s.suffix()),
            Term::Var(x) => write!(f, "{}", x),
            Term::Num(q) => {
                if q.is_negative() && ctx > 0 {
                    write!(f, "({})", rational_to_decimal(q, 12))
                } else {
                    write!(f, "{}", rational_to_decimal(q, 12))
                }
            }
            Term::Bool(b) => write!(f, "{}", b),
            Term::Unit => write!(f, "()"),
            Term::Inf => write!(f, "inf"),
            Term::Lam(xs, b) => {
                if ctx > 0 {
                    write!(f, "(")?;
                }
                write!(f, "fun {} -> ", xs.join(" "))?;
                b.fmt_prec(f, 0)?;
                if ctx > 0 {
                    write!(f, ")")?;
                }
                Ok(())
            }
            Term::App(op, args) => {
                if let (Some(p), [a, b]) = (infix(op), args.as_slice()) {
                    if p < ctx {
                        write!(f, "(")?;
                    }
                    let (lp, rp) = if op == "::" { (p + 1, p) } else { (p, p + 1) };
                    a.fmt_prec(f, lp)?;
                    write!(f, " {} ", op)?;
                    b.fmt_prec(f, rp)?;
                    if p < ctx {
                        write!(f, ")")?;
                    }
                    return Ok(());
                }
                match (op.as_str(), args.as_slice()) {
                    ("neg", [a]) => {
                        write!(f, "-")?;
                        a.fmt_prec(f, 7)
                    }
                    ("abs", [a]) => {
                        write!(f, "|")?;
                        a.fmt_prec(f, 0)?;
                        write!(f, "|")
                    }
                    ("nil", []) => write!(f, "[]"),
                    ("tuple", _) => {
                        write!(f, "(")?;
                        for (i, a) in args.iter().enumerate() {
                            if i > 0 {
                                write!(f, ", ")?;
                            }
                            a.fmt_prec(f, 0)?;
                        }
                        write!(f, ")")
                    }
                    _ => {
                        write!(f, "{}(", op)?;
                        for (i, a) in args.iter().enumerate() {
                            if i > 0 {
                                write!(f, ", ")?;
                            }
                            a.fmt_prec(f, 0)?;
                        }
                        write!(f, ")")
                    }
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Polynomial with rational coefficients over opaque atoms (named constants, variables, terms).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<(Vec<Term>, BigRational)>", from = "Vec<(Vec<Term>, BigRational)>")]
pub struct Poly {
    /// Sorted monomial -> coefficient; no zero coefficients.
    terms: BTreeMap<Vec<Term>, BigRational>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(q: BigRational) -> Poly {
        let mut p = Poly::zero();
        if !q.is_zero() {
            p.terms.insert(Vec::new(), q);
        }
        p
    }

    pub fn int(n: i64) -> Poly {
        Poly::constant(BigRational::from_integer(n.into()))
    }

    pub fn atom(t: Term) -> Poly {
        let mut p = Poly::zero();
        p.terms.insert(vec![t], BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn monomials(&self) -> impl Iterator<Item = (&[Term], &BigRational)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), c))
    }

    fn add_mono(&mut self, m: Vec<Term>, c: BigRational) {
        let e = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_mono(m.clone(), c.clone());
        }
        r
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect() }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn scale(&self, q: &BigRational) -> Poly {
        if q.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect() }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let mut m = m1.clone();
                m.extend(m2.iter().cloned());
                m.sort();
                r.add_mono(m, c1 * c2);
            }
        }
        r
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    /// Exact square root when the polynomial is a single monomial with even exponents
    /// and a square rational coefficient.
    pub fn sqrt(&self) -> Option<Poly> {
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next()?;
        if c.is_negative() {
            return None;
        }
        let rn = c.numer().sqrt();
        let rd = c.denom().sqrt();
        if &(&rn * &rn) != c.numer() || &(&rd * &rd) != c.denom() {
            return None;
        }
        let mut half = Vec::new();
        let mut i = 0;
        while i < m.len() {
            if i + 1 >= m.len() || m[i] != m[i + 1] {
                return None;
            }
            half.push(m[i].clone());
            i += 2;
        }
        let mut p = Poly::zero();
        p.terms.insert(half, BigRational::new(rn, rd));
        Some(p)
    }

    /// Reads `t` as a polynomial; non-arithmetic subterms become atoms.
    pub fn of_term(t: &Term) -> Poly {
        match t {
            Term::Num(q) => Poly::constant(q.clone()),
            Term::App(op, a) if a.len() == 2 && matches!(op.as_str(), "+" | "-" | "*") => {
                let (x, y) = (Poly::of_term(&a[0]), Poly::of_term(&a[1]));
                match op.as_str() {
                    "+" => x.add(&y),
                    "-" => x.sub(&y),
                    _ => x.mul(&y),
                }
            }
            Term::App(op, a) if op == "/" && a.len() == 2 => match Poly::of_term(&a[1]).as_constant() {
                Some(q) if !q.is_zero() => Poly::of_term(&a[0]).scale(&q.recip()),
                _ => Poly::atom(t.clone()),
            },
            Term::App(op, a) if op == "neg" && a.len() == 1 => Poly::of_term(&a[0]).neg(),
            _ => Poly::atom(t.clone()),
        }
    }

    pub fn to_term(&self) -> Term {
        let mut out: Option<Term> = None;
        for (m, c) in &self.terms {
            let mut factors: Vec<Term> = m.clone();
            let mono = if m.is_empty() {
                Term::Num(c.clone())
            } else {
                if !c.is_one() {
                    factors.insert(0, Term::Num(c.clone()));
                }
                factors.into_iter().reduce(|a, b| Term::app("*", vec![a, b])).unwrap()
            };
            out = Some(match out {
                None => mono,
                Some(acc) => Term::app("+", vec![acc, mono]),
            });
        }
        out.unwrap_or_else(|| Term::int(0))
    }

    /// Value when every atom is a named constant.
    pub fn eval_constants(&self) -> Option<f64> {
        let mut s = 0.0;
        for (m, c) in &self.terms {
            let mut v = rational_to_f64(c);
            for a in m {
                match a {
                    Term::Var(x) => v *= named_constant(x)?,
                    _ => return None,
                }
            }
            s += v;
        }
        Some(s)
    }

    /// Sound sufficient test for `self >= 0` given a nonnegativity oracle for atoms.
    /// Monomials are grouped by their non-constant atoms; each group's coefficient
    /// (with named constants evaluated) must be nonnegative and its atoms nonnegative.
    pub fn nonneg(&self, atom_nonneg: &dyn Fn(&Term) -> bool) -> bool {
        let mut groups: BTreeMap<Vec<Term>, (BigRational, f64, bool)> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut key = Vec::new();
            let mut cval = 1.0;
            let mut has_const = false;
            for a in m {
                match a {
                    Term::Var(x) if named_constant(x).is_some() => {
                        cval *= named_constant(x).unwrap();
                        has_const = true;
                    }
                    _ => key.push(a.clone()),
                }
            }
            let g = groups.entry(key).or_insert((BigRational::zero(), 0.0, false));
            if has_const {
                g.1 += rational_to_f64(c) * cval;
                g.2 = true;
            } else {
                g.0 += c.clone();
            }
        }
        groups.iter().all(|(key, (exact, approx, inexact))| {
            let ok = if *inexact { rational_to_f64(exact) + approx >= -1e-12 } else { !exact.is_negative() };
            let even = |a: &Term| key.iter().filter(|b| *b == a).count() % 2 == 0;
            ok && key.iter().all(|a| even(a) || atom_nonneg(a))
        })
    }
}

impl From<Poly> for Vec<(Vec<Term>, BigRational)> {
    fn from(p: Poly) -> Self {
        p.terms.into_iter().collect()
    }
}

impl From<Vec<(Vec<Term>, BigRational)>> for Poly {
    fn from(v: Vec<(Vec<Term>, BigRational)>) -> Self {
        let mut p = Poly::zero();
        for (m, c) in v {
            p.add_mono(m, c);
        }
        p
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

/// Divergence index of a relational monad. `EpsD` carries its epsilon as a polynomial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FIdx {
    SD,
    HD,
    KL,
    EpsD(Poly),
}

impl FIdx {
    pub fn same_kind(&self, o: &FIdx) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(o)
    }

    /// Concrete divergence at a numeric valuation of the epsilon polynomial.
    pub fn to_kind(&self, eps: impl Fn(&Poly) -> Option<f64>) -> Option<FDivKind> {
        Some(match self {
            FIdx::SD => FDivKind::SD,
            FIdx::HD => FDivKind::HD,
            FIdx::KL => FDivKind::KL,
            FIdx::EpsD(p) => FDivKind::EpsD(eps(p)?),
        })
    }
}

/// `composable(f1, f2)` at the level of indices.
pub fn compose_idx(f1: &FIdx, f2: &FIdx) -> Option<FIdx> {
    match (f1, f2) {
        (FIdx::SD, FIdx::SD) => Some(FIdx::SD),
        (FIdx::HD, FIdx::HD) => Some(FIdx::HD),
        (FIdx::KL, FIdx::KL) => Some(FIdx::KL),
        (FIdx::EpsD(a), FIdx::EpsD(b)) => Some(FIdx::EpsD(a.add(b))),
        _ => None,
    }
}

impl fmt::Display for FIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FIdx::SD => write!(f, "SD"),
            FIdx::HD => write!(f, "HD"),
            FIdx::KL => write!(f, "KL"),
            FIdx::EpsD(p) => write!(f, "epsD({})", p),
        }
    }
}

pub fn q_of(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| rational_to_f64(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_arithmetic_cancels() {
        let eps = Poly::atom(Term::var("eps"));
        let two_eps = eps.scale(&q_of(2, 1));
        assert_eq!(two_eps.sub(&eps).sub(&eps), Poly::zero());
        let t = Term::app("*", vec![Term::int(2), Term::var("eps")]);
        assert_eq!(Poly::of_term(&t), two_eps);
    }

    #[test]
    fn constants_compare_numerically() {
        let rho = Poly::atom(Term::var("rho"));
        let d = rho.sub(&rho.mul(&rho));
        assert!(d.nonneg(&|_| false));
        assert!(!d.neg().nonneg(&|_| false));
    }

    #[test]
    fn nonneg_needs_atom_signs() {
        let e = Poly::atom(Term::var("eps"));
        assert!(e.nonneg(&|_| true));
        assert!(!e.nonneg(&|_| false));
        assert!(e.mul(&e).nonneg(&|_| false));
    }

    #[test]
    fn square_roots_of_monomials() {
        let rho = Poly::atom(Term::var("rho"));
        assert_eq!(rho.mul(&rho).sqrt(), Some(rho.clone()));
        assert_eq!(rho.sqrt(), None);
        assert_eq!(Poly::constant(q_of(4, 9)).sqrt(), Some(Poly::constant(q_of(2, 3))));
    }
}
