//! Relational assertions over left/right instances of program terms.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::term::{FIdx, Side, Term};
use crate::types::SimpleType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Assertion {
    True,
    False,
    Not(Box<Assertion>),
    And(Vec<Assertion>),
    Or(Vec<Assertion>),
    Implies(Box<Assertion>, Box<Assertion>),
    Eq(Term, Term),
    Le(Term, Term),
    Lt(Term, Term),
    /// Adjacency of two instances.
    Phi(Term, Term),
    /// `Delta[f](l, r) <= bound`
    Delta { f: FIdx, l: Term, r: Term, bound: Term },
    /// `f` belongs to the class of admissible divergences.
    InF(FIdx),
    /// Named side predicate such as `beta1(a, b)`.
    Pred(String, Vec<Term>),
    Forall(String, SimpleType, Box<Assertion>),
    Exists(String, SimpleType, Box<Assertion>),
}

impl Assertion {
    pub fn and(items: Vec<Assertion>) -> Assertion {
        let mut out = Vec::new();
        for a in items {
            match a {
                Assertion::True => {}
                Assertion::And(xs) => out.extend(xs),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Assertion::True,
            1 => out.pop().unwrap(),
            _ => Assertion::And(out),
        }
    }

    pub fn implies(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Implies(Box::new(a), Box::new(b))
    }

    /// `x.L = x.R`
    pub fn diag(x: &str) -> Assertion {
        Assertion::Eq(Term::rel(x, Side::L), Term::rel(x, Side::R))
    }

    pub fn abs_diff_le(l: Term, r: Term, k: Term) -> Assertion {
        Assertion::Le(Term::app("abs", vec![Term::app("-", vec![l, r])]), k)
    }

    /// Whether the assertion is `x.L = x.R` (up to orientation).
    pub fn is_diag_of(&self, x: &str) -> bool {
        match self {
            Assertion::Eq(Term::Rel(a, s1), Term::Rel(b, s2)) => a == x && b == x && s1 != s2,
            _ => false,
        }
    }

    pub fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> Assertion {
        use Assertion::*;
        let idx = |i: &FIdx| match i {
            FIdx::EpsD(p) => FIdx::EpsD(super::term::Poly::of_term(&f(&p.to_term()))),
            other => other.clone(),
        };
        match self {
            True => True,
            False => False,
            Not(a) => Not(Box::new(a.map_terms(f))),
            And(xs) => And(xs.iter().map(|a| a.map_terms(f)).collect()),
            Or(xs) => Or(xs.iter().map(|a| a.map_terms(f)).collect()),
            Implies(a, b) => Implies(Box::new(a.map_terms(f)), Box::new(b.map_terms(f))),
            Eq(a, b) => Eq(f(a), f(b)),
            Le(a, b) => Le(f(a), f(b)),
            Lt(a, b) => Lt(f(a), f(b)),
            Phi(a, b) => Phi(f(a), f(b)),
            Delta { f: k, l, r, bound } => Delta { f: idx(k), l: f(l), r: f(r), bound: f(bound) },
            InF(k) => InF(idx(k)),
            Pred(n, xs) => Pred(n.clone(), xs.iter().map(f).collect()),
            Forall(x, t, a) => Forall(x.clone(), t.clone(), Box::new(a.map_terms(f))),
            Exists(x, t, a) => Exists(x.clone(), t.clone(), Box::new(a.map_terms(f))),
        }
    }

    /// Substitutes relational and plain occurrences of variables.
    pub fn subst(&self, s: &dyn Fn(&Term) -> Option<Term>) -> Assertion {
        self.map_terms(&|t| t.subst(s))
    }

    pub fn rename(&self, from: &str, to: &str) -> Assertion {
        if from == to {
            return self.clone();
        }
        self.map_terms(&|t| t.rename(from, to))
    }

    /// Instantiates the relational variable `x` with a pair of terms.
    pub fn instantiate(&self, x: &str, l: &Term, r: &Term) -> Assertion {
        self.subst(&|t| match t {
            Term::Rel(y, Side::L) if y == x => Some(l.clone()),
            Term::Rel(y, Side::R) if y == x => Some(r.clone()),
            Term::Var(y) if y == x => Some(l.clone()),
            _ => None,
        })
    }
}

fn fmt_list(f: &mut fmt::Formatter<'_>, xs: &[Assertion], sep: &str) -> fmt::Result {
    for (i, a) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, " {} ", sep)?;
        }
        match a {
            Assertion::And(_) | Assertion::Or(_) | Assertion::Implies(..) => write!(f, "({})", a)?,
            _ => write!(f, "{}", a)?,
        }
    }
    Ok(())
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Assertion::*;
        match self {
            True => write!(f, "true"),
            False => write!(f, "false"),
            Not(a) => write!(f, "not ({})", a),
            And(xs) => fmt_list(f, xs, "&&"),
            Or(xs) => fmt_list(f, xs, "||"),
            Implies(a, b) => write!(f, "({}) => ({})", a, b),
            Eq(a, b) => write!(f, "{} = {}", a, b),
            Le(a, b) => write!(f, "{} <= {}", a, b),
            Lt(a, b) => write!(f, "{} < {}", a, b),
            Phi(a, b) => write!(f, "{} Phi {}", a, b),
            Delta { f: k, l, r, bound } => write!(f, "Delta[{}]({}, {}) <= {}", k, l, r, bound),
            InF(k) => write!(f, "{} in F", k),
            Pred(n, xs) => {
                write!(f, "{}(", n)?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", x)?;
                }
                write!(f, ")")
            }
            Forall(x, t, a) => write!(f, "forall {} : {}. {}", x, t, a),
            Exists(x, t, a) => write!(f, "exists {} : {}. {}", x, t, a),
        }
    }
}
