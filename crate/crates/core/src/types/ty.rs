use std::fmt;

use serde::{Deserialize, Serialize};

/// Simple types of the language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimpleType {
    Unit,
    Bool,
    Nat,
    Real,
    /// Nonnegative reals.
    PosReal,
    /// Nonnegative reals extended with infinity.
    ExtPosReal,
    /// The interval [0,1].
    UnitInterval,
    /// Finite enumeration with constructors `0..k`.
    Enum(u32),
    List(Box<SimpleType>),
    Tuple(Vec<SimpleType>),
    Monad(Box<SimpleType>),
    Dist(Box<SimpleType>),
    Arrow(Box<SimpleType>, Box<SimpleType>),
}

impl SimpleType {
    pub fn list(t: SimpleType) -> Self {
        SimpleType::List(Box::new(t))
    }

    pub fn monad(t: SimpleType) -> Self {
        SimpleType::Monad(Box::new(t))
    }

    pub fn dist(t: SimpleType) -> Self {
        SimpleType::Dist(Box::new(t))
    }

    pub fn arrow(a: SimpleType, b: SimpleType) -> Self {
        SimpleType::Arrow(Box::new(a), Box::new(b))
    }

    /// `[0,1]^n`.
    pub fn unit_cube(n: usize) -> Self {
        SimpleType::Tuple(vec![SimpleType::UnitInterval; n])
    }

    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            SimpleType::Nat | SimpleType::Real | SimpleType::PosReal | SimpleType::ExtPosReal | SimpleType::UnitInterval
        )
    }

    /// Base types: scalars, enums, and lists/tuples of base types.
    pub fn is_base(&self) -> bool {
        match self {
            SimpleType::Unit | SimpleType::Bool | SimpleType::Enum(_) => true,
            t if t.is_numeric() => true,
            SimpleType::List(t) => t.is_base(),
            SimpleType::Tuple(ts) => ts.iter().all(|t| t.is_base()),
            _ => false,
        }
    }

    /// Types whose values can sit in the support of a distribution.
    pub fn is_data(&self) -> bool {
        match self {
            SimpleType::Dist(t) => t.is_base(),
            SimpleType::List(t) => t.is_data(),
            SimpleType::Tuple(ts) => ts.iter().all(|t| t.is_data()),
            t => t.is_base(),
        }
    }

    /// Well-formedness of the type constructors.
    pub fn well_formed(&self) -> Result<(), String> {
        match self {
            SimpleType::Dist(t) => {
                if t.is_base() {
                    Ok(())
                } else {
                    Err(format!("D[{}]: symbolic distributions range over base types only", t))
                }
            }
            SimpleType::Monad(t) => {
                t.well_formed()?;
                if t.is_data() {
                    Ok(())
                } else {
                    Err(format!("M[{}]: distributions range over base or D types only", t))
                }
            }
            SimpleType::List(t) => {
                t.well_formed()?;
                if t.is_data() {
                    Ok(())
                } else {
                    Err(format!("list {}: lists hold data values only", t))
                }
            }
            SimpleType::Tuple(ts) => ts.iter().try_for_each(|t| t.well_formed()),
            SimpleType::Arrow(a, b) => {
                a.well_formed()?;
                b.well_formed()
            }
            SimpleType::Enum(0) => Err("[0] is empty".into()),
            _ => Ok(()),
        }
    }

    /// Subtyping: numeric lattice plus covariance in list/tuple/M/D and the usual arrow rule.
    pub fn is_subtype(&self, other: &SimpleType) -> bool {
        use SimpleType::*;
        if self == other {
            return true;
        }
        match (self, other) {
            (UnitInterval, PosReal | Real | ExtPosReal) => true,
            (Nat, PosReal | Real | ExtPosReal) => true,
            (PosReal, Real | ExtPosReal) => true,
            (Enum(_), Nat | PosReal | Real | ExtPosReal) => true,
            (List(a), List(b)) | (Monad(a), Monad(b)) | (Dist(a), Dist(b)) => a.is_subtype(b),
            (Tuple(a), Tuple(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.is_subtype(y)),
            (Arrow(a1, b1), Arrow(a2, b2)) => a2.is_subtype(a1) && b1.is_subtype(b2),
            _ => false,
        }
    }

    /// Least upper bound, when it exists.
    pub fn join(&self, other: &SimpleType) -> Option<SimpleType> {
        use SimpleType::*;
        if self.is_subtype(other) {
            return Some(other.clone());
        }
        if other.is_subtype(self) {
            return Some(self.clone());
        }
        match (self, other) {
            (a, b) if a.is_numeric() && b.is_numeric() || matches!((a, b), (Enum(_), _) | (_, Enum(_))) => {
                let cands = [PosReal, Real];
                cands.into_iter().find(|c| a.is_subtype(c) && b.is_subtype(c))
            }
            (List(a), List(b)) => a.join(b).map(SimpleType::list),
            (Monad(a), Monad(b)) => a.join(b).map(SimpleType::monad),
            (Dist(a), Dist(b)) => a.join(b).map(SimpleType::dist),
            (Tuple(a), Tuple(b)) if a.len() == b.len() => {
                a.iter().zip(b).map(|(x, y)| x.join(y)).collect::<Option<Vec<_>>>().map(Tuple)
            }
            _ => None,
        }
    }
}

fn fmt_atomic(t: &SimpleType, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        SimpleType::Arrow(..) | SimpleType::Tuple(_) | SimpleType::List(_) => write!(f, "({})", t),
        _ => write!(f, "{}", t),
    }
}

impl fmt::Display for SimpleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimpleType::Unit => write!(f, "unit"),
            SimpleType::Bool => write!(f, "bool"),
            SimpleType::Nat => write!(f, "nat"),
            SimpleType::Real => write!(f, "real"),
            SimpleType::PosReal => write!(f, "pos"),
            SimpleType::ExtPosReal => write!(f, "extpos"),
            SimpleType::UnitInterval => write!(f, "[0,1]"),
            SimpleType::Enum(k) => write!(f, "[{}]", k),
            SimpleType::List(t) => {
                write!(f, "list ")?;
                fmt_atomic(t, f)
            }
            SimpleType::Tuple(ts) if !ts.is_empty() && ts.iter().all(|t| *t == SimpleType::UnitInterval) => {
                write!(f, "[0,1]^{}", ts.len())
            }
            SimpleType::Tuple(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    fmt_atomic(t, f)?;
                }
                Ok(())
            }
            SimpleType::Monad(t) => write!(f, "M[{}]", t),
            SimpleType::Dist(t) => write!(f, "D[{}]", t),
            SimpleType::Arrow(a, b) => {
                match **a {
                    SimpleType::Arrow(..) => write!(f, "({})", a)?,
                    _ => write!(f, "{}", a)?,
                }
                write!(f, " -> {}", b)
            }
        }
    }
}
