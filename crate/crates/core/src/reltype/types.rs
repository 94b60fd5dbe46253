//! Relational types.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::assertion::Assertion;
use super::term::{FIdx, Side, Term};
use crate::types::SimpleType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RelType {
    Base(SimpleType),
    /// Symbolic distributions `D[t]`.
    Dist(SimpleType),
    /// `{x :: T | phi}`
    Refine { var: String, base: Box<RelType>, phi: Assertion },
    /// `M[f, delta] T`
    Monad { f: FIdx, delta: Term, inner: Box<RelType> },
    /// `(x :: T) -> U`
    Pi { var: String, dom: Box<RelType>, cod: Box<RelType> },
}

impl RelType {
    pub fn refine(var: &str, base: RelType, phi: Assertion) -> RelType {
        RelType::Refine { var: var.to_string(), base: Box::new(base), phi }
    }

    /// `{x :: t | x.L = x.R}`
    pub fn diag(var: &str, t: SimpleType) -> RelType {
        let base = match t {
            SimpleType::Dist(inner) => RelType::Dist(*inner),
            other => RelType::Base(other),
        };
        RelType::refine(var, base, Assertion::diag(var))
    }

    pub fn monad(f: FIdx, delta: Term, inner: RelType) -> RelType {
        RelType::Monad { f, delta, inner: Box::new(inner) }
    }

    pub fn pi(var: &str, dom: RelType, cod: RelType) -> RelType {
        RelType::Pi { var: var.to_string(), dom: Box::new(dom), cod: Box::new(cod) }
    }

    /// The simple type obtained by dropping refinements and indices.
    pub fn erase(&self) -> SimpleType {
        match self {
            RelType::Base(t) => t.clone(),
            RelType::Dist(t) => SimpleType::dist(t.clone()),
            RelType::Refine { base, .. } => base.erase(),
            RelType::Monad { inner, .. } => SimpleType::monad(inner.erase()),
            RelType::Pi { dom, cod, .. } => SimpleType::arrow(dom.erase(), cod.erase()),
        }
    }

    /// Refinement variable and assertion, `None` for unrefined types.
    pub fn refinement(&self) -> Option<(&str, &Assertion)> {
        match self {
            RelType::Refine { var, phi, .. } => Some((var, phi)),
            _ => None,
        }
    }

    pub fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> RelType {
        match self {
            RelType::Base(_) | RelType::Dist(_) => self.clone(),
            RelType::Refine { var, base, phi } => RelType::Refine { var: var.clone(), base: Box::new(base.map_terms(f)), phi: phi.map_terms(f) },
            RelType::Monad { f: k, delta, inner } => {
                let k = match k {
                    FIdx::EpsD(p) => FIdx::EpsD(super::term::Poly::of_term(&f(&p.to_term()))),
                    other => other.clone(),
                };
                RelType::Monad { f: k, delta: f(delta), inner: Box::new(inner.map_terms(f)) }
            }
            RelType::Pi { var, dom, cod } => RelType::Pi { var: var.clone(), dom: Box::new(dom.map_terms(f)), cod: Box::new(cod.map_terms(f)) },
        }
    }

    /// Substitutes the relational variable `x` by a pair of terms in the whole type.
    pub fn instantiate(&self, x: &str, l: &Term, r: &Term) -> RelType {
        self.map_terms(&|t| {
            t.subst(&|u| match u {
                Term::Rel(y, Side::L) if y == x => Some(l.clone()),
                Term::Rel(y, Side::R) if y == x => Some(r.clone()),
                Term::Var(y) if y == x => Some(l.clone()),
                _ => None,
            })
        })
    }

    pub fn rename(&self, from: &str, to: &str) -> RelType {
        if from == to {
            return self.clone();
        }
        self.map_terms(&|t| t.rename(from, to))
    }
}

impl fmt::Display for RelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelType::Base(t) => write!(f, "{}", t),
            RelType::Dist(t) => write!(f, "D[{}]", t),
            RelType::Refine { var, base, phi } => {
                if phi.is_diag_of(var) {
                    write!(f, "{{{} :: {} | =}}", var, base)
                } else if matches!(phi, Assertion::Phi(Term::Rel(a, Side::L), Term::Rel(b, Side::R)) if a == var && b == var) {
                    write!(f, "{{{} :: {} | Phi}}", var, base)
                } else {
                    write!(f, "{{{} :: {} | {}}}", var, base, phi)
                }
            }
            RelType::Monad { f: k, delta, inner } => write!(f, "M[{}, {}]{}", k, delta, inner),
            RelType::Pi { var, dom, cod } => match dom.as_ref() {
                RelType::Refine { var: v, .. } if v == var => write!(f, "{} -> {}", dom, cod),
                _ => write!(f, "({} :: {}) -> {}", var, dom, cod),
            },
        }
    }
}
