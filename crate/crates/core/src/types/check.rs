use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::ty::SimpleType;
use crate::syntax::{BinOp, Expr, ExprKind, Lit, Param, Pattern, Prim, SourceSpan, UnOp};

/// Simple types with unification variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ty {
    Var(u32),
    Unit,
    Bool,
    Nat,
    Real,
    PosReal,
    ExtPosReal,
    UnitInterval,
    Enum(u32),
    List(Box<Ty>),
    Tuple(Vec<Ty>),
    Monad(Box<Ty>),
    Dist(Box<Ty>),
    Arrow(Box<Ty>, Box<Ty>),
}

impl Ty {
    fn list(t: Ty) -> Ty {
        Ty::List(Box::new(t))
    }
    fn monad(t: Ty) -> Ty {
        Ty::Monad(Box::new(t))
    }
    fn dist(t: Ty) -> Ty {
        Ty::Dist(Box::new(t))
    }
    fn arrow(a: Ty, b: Ty) -> Ty {
        Ty::Arrow(Box::new(a), Box::new(b))
    }

    pub fn from_simple(t: &SimpleType) -> Ty {
        match t {
            SimpleType::Unit => Ty::Unit,
            SimpleType::Bool => Ty::Bool,
            SimpleType::Nat => Ty::Nat,
            SimpleType::Real => Ty::Real,
            SimpleType::PosReal => Ty::PosReal,
            SimpleType::ExtPosReal => Ty::ExtPosReal,
            SimpleType::UnitInterval => Ty::UnitInterval,
            SimpleType::Enum(k) => Ty::Enum(*k),
            SimpleType::List(t) => Ty::list(Ty::from_simple(t)),
            SimpleType::Tuple(ts) => Ty::Tuple(ts.iter().map(Ty::from_simple).collect()),
            SimpleType::Monad(t) => Ty::monad(Ty::from_simple(t)),
            SimpleType::Dist(t) => Ty::dist(Ty::from_simple(t)),
            SimpleType::Arrow(a, b) => Ty::arrow(Ty::from_simple(a), Ty::from_simple(b)),
        }
    }

    /// The variable-free type, if there is one.
    pub fn to_simple(&self) -> Option<SimpleType> {
        Some(match self {
            Ty::Var(_) => return None,
            Ty::Unit => SimpleType::Unit,
            Ty::Bool => SimpleType::Bool,
            Ty::Nat => SimpleType::Nat,
            Ty::Real => SimpleType::Real,
            Ty::PosReal => SimpleType::PosReal,
            Ty::ExtPosReal => SimpleType::ExtPosReal,
            Ty::UnitInterval => SimpleType::UnitInterval,
            Ty::Enum(k) => SimpleType::Enum(*k),
            Ty::List(t) => SimpleType::list(t.to_simple()?),
            Ty::Tuple(ts) => SimpleType::Tuple(ts.iter().map(|t| t.to_simple()).collect::<Option<_>>()?),
            Ty::Monad(t) => SimpleType::monad(t.to_simple()?),
            Ty::Dist(t) => SimpleType::dist(t.to_simple()?),
            Ty::Arrow(a, b) => SimpleType::arrow(a.to_simple()?, b.to_simple()?),
        })
    }

    fn is_numeric(&self) -> bool {
        matches!(self, Ty::Nat | Ty::Real | Ty::PosReal | Ty::ExtPosReal | Ty::UnitInterval | Ty::Enum(_))
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn var_name(v: u32) -> String {
            let c = (b'a' + (v % 26) as u8) as char;
            if v < 26 {
                format!("'{}", c)
            } else {
                format!("'{}{}", c, v / 26)
            }
        }
        match self {
            Ty::Var(v) => write!(f, "{}", var_name(*v)),
            Ty::List(t) => match **t {
                Ty::Arrow(..) | Ty::Tuple(_) | Ty::List(_) => write!(f, "list ({})", t),
                _ => write!(f, "list {}", t),
            },
            Ty::Tuple(ts) => {
                let parts: Vec<String> = ts
                    .iter()
                    .map(|t| match t {
                        Ty::Arrow(..) | Ty::Tuple(_) | Ty::List(_) => format!("({})", t),
                        _ => t.to_string(),
                    })
                    .collect();
                write!(f, "{}", parts.join(" * "))
            }
            Ty::Monad(t) => write!(f, "M[{}]", t),
            Ty::Dist(t) => write!(f, "D[{}]", t),
            Ty::Arrow(a, b) => match **a {
                Ty::Arrow(..) => write!(f, "({}) -> {}", a, b),
                _ => write!(f, "{} -> {}", a, b),
            },
            other => write!(f, "{}", other.to_simple().expect("scalar type")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{span}: type error [{rule}]: {msg}")]
pub struct TypeError {
    pub span: SourceSpan,
    /// Name of the typing rule whose premise failed.
    pub rule: &'static str,
    pub msg: String,
}

/// Ordered assignment of types to variables; rebinding a name replaces it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeEnv {
    vars: Vec<(String, SimpleType)>,
}

impl TypeEnv {
    pub fn new() -> Self {
        TypeEnv::default()
    }

    pub fn insert(&mut self, name: &str, t: SimpleType) {
        self.vars.retain(|(n, _)| n != name);
        self.vars.push((name.to_string(), t));
    }

    pub fn with(mut self, name: &str, t: SimpleType) -> Self {
        self.insert(name, t);
        self
    }

    pub fn get(&self, name: &str) -> Option<&SimpleType> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SimpleType)> {
        self.vars.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

/// Type of a closed program or an expression under `env`.
pub fn typecheck(env: &TypeEnv, e: &Expr) -> Result<SimpleType, TypeError> {
    let mut c = Checker::default();
    let mut scope: Vec<(String, Ty)> = env.iter().map(|(n, t)| (n.to_string(), Ty::from_simple(t))).collect();
    let t = c.infer(&mut scope, e)?;
    let t = c.zonk(&t);
    t.to_simple().ok_or_else(|| TypeError {
        span: e.span.clone(),
        rule: "Annot",
        msg: format!("ambiguous type {}; add a binder annotation", t),
    })
}

/// Result type after all arguments of a curried function are supplied.
pub fn result_type(t: &SimpleType) -> &SimpleType {
    match t {
        SimpleType::Arrow(_, b) => result_type(b),
        other => other,
    }
}

/// Signature of a primitive, with `'a`-style variables for the polymorphic ones.
pub fn primitive_signature(name: &str) -> Option<Ty> {
    use Ty::*;
    let p = Prim::from_name(name)?;
    let v = |i| Ty::Var(i);
    let dom = |ts: Vec<Ty>| if ts.len() == 1 { ts.into_iter().next().unwrap() } else { Tuple(ts) };
    let sig = |args: Vec<Ty>, res: Ty| Ty::arrow(dom(args), res);
    Some(match p {
        Prim::Uniform => Ty::dist(UnitInterval),
        Prim::Bernoulli => sig(vec![UnitInterval], Ty::dist(Bool)),
        Prim::Beta => sig(vec![PosReal, PosReal], Ty::dist(UnitInterval)),
        Prim::Normal => sig(vec![Real, PosReal], Ty::dist(Real)),
        Prim::Dirichlet => sig(vec![PosReal, PosReal, PosReal], Ty::dist(Ty::Tuple(vec![UnitInterval, UnitInterval]))),
        Prim::Multinomial => sig(vec![UnitInterval, UnitInterval], Ty::dist(Enum(3))),
        Prim::LapMech | Prim::GaussMech => sig(vec![PosReal, Real], Ty::monad(Real)),
        Prim::ExpMech => sig(vec![Real, Ty::arrow(v(0), Ty::arrow(v(1), Real)), v(0)], Ty::monad(v(1))),
        Prim::GetParams => sig(vec![Ty::dist(UnitInterval)], Tuple(vec![PosReal, PosReal])),
        Prim::GetMean => sig(vec![Ty::dist(Real)], Real),
        Prim::GaussSigma => sig(vec![PosReal, PosReal], PosReal),
        Prim::Hellinger | Prim::StatDist => sig(vec![Ty::dist(v(0)), Ty::dist(v(0))], UnitInterval),
        Prim::Length => sig(vec![Ty::list(v(0))], Nat),
        Prim::AtLeast => sig(vec![Real, PosReal], PosReal),
        Prim::Sqrt => sig(vec![PosReal], PosReal),
        Prim::Exp => sig(vec![Real], PosReal),
        Prim::Ln => sig(vec![PosReal], Real),
        Prim::Abs => sig(vec![Real], PosReal),
    })
}

/// Parameter tuple type returned by `getParams` on a distribution over `t`.
pub fn get_params_type(t: &SimpleType) -> Option<SimpleType> {
    use SimpleType::*;
    match t {
        UnitInterval => Some(Tuple(vec![PosReal, PosReal])),
        Real => Some(Tuple(vec![Real, PosReal])),
        Bool => Some(UnitInterval),
        Enum(k) if *k >= 2 => Some(if *k == 2 { UnitInterval } else { SimpleType::unit_cube(*k as usize - 1) }),
        Tuple(ts) if !ts.is_empty() && ts.iter().all(|x| *x == UnitInterval) => Some(Tuple(vec![PosReal; ts.len() + 1])),
        _ => None,
    }
}

/// Type of a numeric literal, by value range.
pub fn literal_type(r: &BigRational) -> SimpleType {
    if r.is_negative() {
        SimpleType::Real
    } else if *r <= BigRational::one() {
        SimpleType::UnitInterval
    } else if r.is_integer() {
        SimpleType::Nat
    } else {
        SimpleType::PosReal
    }
}

#[derive(Default)]
struct Checker {
    subst: BTreeMap<u32, Ty>,
    next: u32,
}

type Scope = Vec<(String, Ty)>;

impl Checker {
    fn fresh(&mut self) -> Ty {
        self.next += 1;
        Ty::Var(self.next - 1)
    }

    fn resolve(&self, t: &Ty) -> Ty {
        let mut cur = t.clone();
        while let Ty::Var(v) = cur {
            match self.subst.get(&v) {
                Some(t) => cur = t.clone(),
                None => return cur,
            }
        }
        cur
    }

    fn zonk(&self, t: &Ty) -> Ty {
        match self.resolve(t) {
            Ty::List(a) => Ty::list(self.zonk(&a)),
            Ty::Monad(a) => Ty::monad(self.zonk(&a)),
            Ty::Dist(a) => Ty::dist(self.zonk(&a)),
            Ty::Tuple(ts) => Ty::Tuple(ts.iter().map(|x| self.zonk(x)).collect()),
            Ty::Arrow(a, b) => Ty::arrow(self.zonk(&a), self.zonk(&b)),
            other => other,
        }
    }

    fn occurs(&self, v: u32, t: &Ty) -> bool {
        match self.resolve(t) {
            Ty::Var(w) => v == w,
            Ty::List(a) | Ty::Monad(a) | Ty::Dist(a) => self.occurs(v, &a),
            Ty::Tuple(ts) => ts.iter().any(|x| self.occurs(v, x)),
            Ty::Arrow(a, b) => self.occurs(v, &a) || self.occurs(v, &b),
            _ => false,
        }
    }

    fn bind(&mut self, v: u32, t: &Ty) -> bool {
        if let Ty::Var(w) = t {
            if *w == v {
                return true;
            }
        }
        if self.occurs(v, t) {
            return false;
        }
        self.subst.insert(v, t.clone());
        true
    }

    /// `a <= b`, binding variables on first contact.
    fn sub(&mut self, a: &Ty, b: &Ty) -> bool {
        use Ty::*;
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (Var(v), _) => self.bind(*v, &b),
            (_, Var(v)) => self.bind(*v, &a),
            _ if a == b => true,
            (UnitInterval, PosReal | Real | ExtPosReal) => true,
            (Nat, PosReal | Real | ExtPosReal) => true,
            (PosReal, Real | ExtPosReal) => true,
            (Enum(_), Nat | PosReal | Real | ExtPosReal) => true,
            (List(x), List(y)) | (Monad(x), Monad(y)) | (Dist(x), Dist(y)) => self.sub(x, y),
            (Tuple(xs), Tuple(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.sub(x, y)),
            (Arrow(a1, b1), Arrow(a2, b2)) => self.sub(a2, a1) && self.sub(b1, b2),
            _ => false,
        }
    }

    fn join(&mut self, a: &Ty, b: &Ty) -> Option<Ty> {
        use Ty::*;
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (Var(v), _) => self.bind(*v, &b).then_some(b.clone()),
            (_, Var(v)) => self.bind(*v, &a).then_some(a.clone()),
            _ if a == b => Some(a),
            _ if a.is_numeric() && b.is_numeric() => {
                let s = self.sub_probe(&a, &b);
                let r = self.sub_probe(&b, &a);
                if s {
                    Some(b)
                } else if r {
                    Some(a)
                } else {
                    [PosReal, Real].into_iter().find(|c| self.sub_probe(&a, c) && self.sub_probe(&b, c))
                }
            }
            (List(x), List(y)) => self.join(x, y).map(Ty::list),
            (Monad(x), Monad(y)) => self.join(x, y).map(Ty::monad),
            (Dist(x), Dist(y)) => self.join(x, y).map(Ty::dist),
            (Tuple(xs), Tuple(ys)) if xs.len() == ys.len() => {
                xs.iter().zip(ys).map(|(x, y)| self.join(x, y)).collect::<Option<Vec<_>>>().map(Tuple)
            }
            (Arrow(..), Arrow(..)) => {
                if self.sub(&a, &b) {
                    Some(b)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    /// Subtype test on variable-free scalars (no binding).
    fn sub_probe(&mut self, a: &Ty, b: &Ty) -> bool {
        let saved = self.subst.clone();
        let r = self.sub(a, b);
        self.subst = saved;
        r
    }

    fn err<T>(&self, e: &Expr, rule: &'static str, msg: String) -> Result<T, TypeError> {
        Err(TypeError { span: e.span.clone(), rule, msg })
    }

    fn expect_sub(&mut self, e: &Expr, rule: &'static str, got: &Ty, want: &Ty) -> Result<(), TypeError> {
        if self.sub(got, want) {
            Ok(())
        } else {
            let (g, w) = (self.zonk(got), self.zonk(want));
            self.err(e, rule, format!("expected {}, found {}", w, g))
        }
    }

    fn check(&mut self, scope: &mut Scope, e: &Expr, want: &Ty, rule: &'static str) -> Result<(), TypeError> {
        let t = self.infer(scope, e)?;
        self.expect_sub(e, rule, &t, want)
    }

    fn numeric(&mut self, e: &Expr, t: &Ty, rule: &'static str) -> Result<Ty, TypeError> {
        let r = self.resolve(t);
        match r {
            Ty::Var(_) => {
                self.sub(&r, &Ty::Real);
                Ok(Ty::Real)
            }
            _ if r.is_numeric() => Ok(r),
            _ => self.err(e, rule, format!("expected a number, found {}", self.zonk(&r))),
        }
    }

    fn bind_pattern(&mut self, scope: &mut Scope, e: &Expr, pat: &Pattern, t: &Ty) -> Result<(), TypeError> {
        match pat {
            Pattern::Wild => Ok(()),
            Pattern::Var(x) => {
                scope.push((x.clone(), t.clone()));
                Ok(())
            }
            Pattern::Lit(l) => {
                let lt = lit_ty(l);
                if self.join(&lt, t).is_some() {
                    Ok(())
                } else {
                    self.err(e, "Case", format!("pattern of type {} cannot match {}", lt, self.zonk(t)))
                }
            }
            Pattern::Nil => {
                let a = self.fresh();
                let want = Ty::list(a);
                if self.sub(&want, t) || self.sub(t, &want) {
                    Ok(())
                } else {
                    self.err(e, "Case", format!("list pattern cannot match {}", self.zonk(t)))
                }
            }
            Pattern::Cons(h, tl) => {
                let a = self.fresh();
                let want = Ty::list(a.clone());
                if !(self.sub(t, &want) || self.sub(&want, t)) {
                    return self.err(e, "Case", format!("list pattern cannot match {}", self.zonk(t)));
                }
                let elem = match self.resolve(t) {
                    Ty::List(x) => *x,
                    _ => a,
                };
                self.bind_pattern(scope, e, h, &elem)?;
                self.bind_pattern(scope, e, tl, &Ty::list(elem))
            }
            Pattern::Tuple(ps) => {
                let r = self.resolve(t);
                let parts = match r {
                    Ty::Tuple(ts) if ts.len() == ps.len() => ts,
                    Ty::Var(_) => {
                        let ts: Vec<Ty> = ps.iter().map(|_| self.fresh()).collect();
                        self.sub(&r, &Ty::Tuple(ts.clone()));
                        ts
                    }
                    other => return self.err(e, "Case", format!("{}-tuple pattern cannot match {}", ps.len(), self.zonk(&other))),
                };
                for (p, pt) in ps.iter().zip(parts) {
                    self.bind_pattern(scope, e, p, &pt)?;
                }
                Ok(())
            }
        }
    }

    fn param_ty(&mut self, p: &Param) -> Ty {
        match &p.ty {
            Some(t) => Ty::from_simple(t),
            None => self.fresh(),
        }
    }

    fn monad_arg(&mut self, e: &Expr, t: &Ty, rule: &'static str) -> Result<Ty, TypeError> {
        let r = self.resolve(t);
        match r {
            Ty::Monad(a) => Ok(*a),
            Ty::Var(_) => {
                let a = self.fresh();
                self.sub(&r, &Ty::monad(a.clone()));
                Ok(a)
            }
            other => self.err(e, rule, format!("expected a distribution M[_], found {}", self.zonk(&other))),
        }
    }

    fn well_formed_monad(&mut self, e: &Expr, inner: &Ty, rule: &'static str) -> Result<(), TypeError> {
        match self.zonk(inner) {
            Ty::Monad(_) => self.err(e, rule, "monad nesting: M[M[_]] is not a type".into()),
            Ty::Arrow(..) => self.err(e, rule, "distributions over functions are not supported".into()),
            _ => Ok(()),
        }
    }

    fn infer(&mut self, scope: &mut Scope, e: &Expr) -> Result<Ty, TypeError> {
        match &e.kind {
            ExprKind::Var(x) => match scope.iter().rev().find(|(n, _)| n == x) {
                Some((_, t)) => Ok(t.clone()),
                None => self.err(e, "Var", format!("unbound variable `{}`", x)),
            },
            ExprKind::Lit(l) => Ok(lit_ty(l)),
            ExprKind::Nil => Ok(Ty::list(self.fresh())),
            ExprKind::Tuple(es) => {
                let ts = es.iter().map(|x| self.infer(scope, x)).collect::<Result<Vec<_>, _>>()?;
                Ok(Ty::Tuple(ts))
            }
            ExprKind::Cons(h, t) => {
                let th = self.infer(scope, h)?;
                let tt = self.infer(scope, t)?;
                let elem = match self.resolve(&tt) {
                    Ty::List(a) => *a,
                    Ty::Var(_) => {
                        let a = self.fresh();
                        self.sub(&tt, &Ty::list(a.clone()));
                        a
                    }
                    other => return self.err(t, "Cons", format!("expected a list, found {}", self.zonk(&other))),
                };
                match self.join(&th, &elem) {
                    Some(j) => Ok(Ty::list(j)),
                    None => {
                        let (a, b) = (self.zonk(&th), self.zonk(&elem));
                        self.err(e, "Cons", format!("element of type {} in a list of {}", a, b))
                    }
                }
            }
            ExprKind::App(f, a) => {
                let tf = self.infer(scope, f)?;
                let ta = self.infer(scope, a)?;
                match self.resolve(&tf) {
                    Ty::Arrow(dom, cod) => {
                        self.expect_sub(a, "App", &ta, &dom)?;
                        Ok(*cod)
                    }
                    Ty::Var(_) => {
                        let r = self.fresh();
                        self.sub(&tf, &Ty::arrow(ta, r.clone()));
                        Ok(r)
                    }
                    other => self.err(f, "App", format!("applying a non-function of type {}", self.zonk(&other))),
                }
            }
            ExprKind::Lam(p, body) => {
                let pt = self.param_ty(p);
                let n = scope.len();
                self.bind_pattern(scope, e, &p.pat, &pt)?;
                let tb = self.infer(scope, body);
                scope.truncate(n);
                Ok(Ty::arrow(pt, tb?))
            }
            ExprKind::Let(p, bound, rest) => {
                let tb = self.infer(scope, bound)?;
                let t = match &p.ty {
                    Some(ann) => {
                        let at = Ty::from_simple(ann);
                        self.expect_sub(bound, "Let", &tb, &at)?;
                        at
                    }
                    None => tb,
                };
                let n = scope.len();
                self.bind_pattern(scope, e, &p.pat, &t)?;
                let r = self.infer(scope, rest);
                scope.truncate(n);
                r
            }
            ExprKind::LetRec { name, params, body, rest } => {
                let pts: Vec<Ty> = params.iter().map(|p| self.param_ty(p)).collect();
                let ret = self.fresh();
                let fty = pts.iter().rev().fold(ret.clone(), |acc, p| Ty::arrow(p.clone(), acc));
                let n = scope.len();
                scope.push((name.clone(), fty.clone()));
                for (p, pt) in params.iter().zip(&pts) {
                    self.bind_pattern(scope, e, &p.pat, pt)?;
                }
                let tb = self.infer(scope, body);
                scope.truncate(n + 1);
                let tb = tb?;
                self.expect_sub(body, "LetRec", &tb, &ret)?;
                let r = self.infer(scope, rest);
                scope.truncate(n);
                r
            }
            ExprKind::If(c, a, b) => {
                self.check(scope, c, &Ty::Bool, "If")?;
                let ta = self.infer(scope, a)?;
                let tb = self.infer(scope, b)?;
                match self.join(&ta, &tb) {
                    Some(t) => Ok(t),
                    None => {
                        let (x, y) = (self.zonk(&ta), self.zonk(&tb));
                        self.err(e, "If", format!("branches have types {} and {}", x, y))
                    }
                }
            }
            ExprKind::Match(s, arms) => {
                let ts = self.infer(scope, s)?;
                let mut out: Option<Ty> = None;
                for arm in arms {
                    let n = scope.len();
                    self.bind_pattern(scope, &arm.body, &arm.pat, &ts)?;
                    let ta = self.infer(scope, &arm.body);
                    scope.truncate(n);
                    let ta = ta?;
                    out = Some(match out {
                        None => ta,
                        Some(prev) => match self.join(&prev, &ta) {
                            Some(j) => j,
                            None => {
                                let (x, y) = (self.zonk(&prev), self.zonk(&ta));
                                return self.err(&arm.body, "Case", format!("arms have types {} and {}", x, y));
                            }
                        },
                    });
                }
                out.map_or_else(|| self.err(e, "Case", "match without arms".into()), Ok)
            }
            ExprKind::BinOp(op, a, b) => {
                let ta = self.infer(scope, a)?;
                let tb = self.infer(scope, b)?;
                self.binop(e, *op, (a, &ta), (b, &tb))
            }
            ExprKind::UnOp(UnOp::Neg, a) => {
                let t = self.infer(scope, a)?;
                self.numeric(a, &t, "Neg")?;
                Ok(Ty::Real)
            }
            ExprKind::UnOp(UnOp::Not, a) => {
                self.check(scope, a, &Ty::Bool, "Not")?;
                Ok(Ty::Bool)
            }
            ExprKind::Prim(p, args) => self.prim(scope, e, *p, args),
            ExprKind::Return(a) => {
                let t = self.infer(scope, a)?;
                self.well_formed_monad(e, &t, "UnitM")?;
                Ok(Ty::monad(t))
            }
            ExprKind::MLet(p, head, body) => {
                let th = self.infer(scope, head)?;
                let inner = self.monad_arg(head, &th, "BindM")?;
                let bt = match &p.ty {
                    Some(ann) => {
                        let at = Ty::from_simple(ann);
                        self.expect_sub(head, "BindM", &inner, &at)?;
                        at
                    }
                    None => inner,
                };
                let n = scope.len();
                self.bind_pattern(scope, e, &p.pat, &bt)?;
                let tb = self.infer(scope, body);
                scope.truncate(n);
                let tb = tb?;
                self.monad_arg(body, &tb, "BindM")?;
                Ok(tb)
            }
            ExprKind::Observe { binder, pred, prior } => {
                let tp = self.infer(scope, prior)?;
                let tau = self.monad_arg(prior, &tp, "Observe")?;
                if let Some(ann) = &binder.ty {
                    self.expect_sub(prior, "Observe", &tau, &Ty::from_simple(ann))?;
                }
                let n = scope.len();
                self.bind_pattern(scope, e, &binder.pat, &tau)?;
                let tq = self.infer(scope, pred);
                scope.truncate(n);
                let tq = tq?;
                match self.resolve(&tq) {
                    Ty::Monad(b) if self.sub(&b, &Ty::Bool) => {}
                    Ty::Var(_) => {
                        self.sub(&tq, &Ty::monad(Ty::Bool));
                    }
                    other => {
                        return self.err(pred, "Observe", format!("the predicate must have type M[bool], found {}", self.zonk(&other)));
                    }
                }
                Ok(Ty::monad(tau))
            }
            ExprKind::Infer(a) => {
                let t = self.infer(scope, a)?;
                let inner = self.monad_arg(a, &t, "Infer")?;
                Ok(Ty::dist(inner))
            }
            ExprKind::Ran(a) => {
                let t = self.infer(scope, a)?;
                match self.resolve(&t) {
                    Ty::Dist(inner) => Ok(Ty::monad(*inner)),
                    Ty::Var(_) => {
                        let x = self.fresh();
                        self.sub(&t, &Ty::dist(x.clone()));
                        Ok(Ty::monad(x))
                    }
                    other => self.err(a, "Ran", format!("expected a symbolic distribution D[_], found {}", self.zonk(&other))),
                }
            }
        }
    }

    fn binop(&mut self, e: &Expr, op: BinOp, (a, ta): (&Expr, &Ty), (b, tb): (&Expr, &Ty)) -> Result<Ty, TypeError> {
        use Ty::*;
        let rule = "Op";
        match op {
            BinOp::And | BinOp::Or => {
                self.expect_sub(a, rule, ta, &Bool)?;
                self.expect_sub(b, rule, tb, &Bool)?;
                Ok(Bool)
            }
            BinOp::Eq | BinOp::Ne => {
                if self.join(ta, tb).is_none() {
                    let (x, y) = (self.zonk(ta), self.zonk(tb));
                    return self.err(e, rule, format!("cannot compare {} with {}", x, y));
                }
                match self.zonk(ta) {
                    Arrow(..) | Monad(_) => self.err(e, rule, "equality on functions or distributions".into()),
                    _ => Ok(Bool),
                }
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                self.numeric(a, ta, rule)?;
                self.numeric(b, tb, rule)?;
                Ok(Bool)
            }
            BinOp::Add | BinOp::Mul | BinOp::Div | BinOp::Sub => {
                let x = self.numeric(a, ta, rule)?;
                let y = self.numeric(b, tb, rule)?;
                let nonneg = |t: &Ty| matches!(t, Nat | PosReal | UnitInterval | Enum(_) | ExtPosReal);
                Ok(match op {
                    BinOp::Sub => Real,
                    BinOp::Div => {
                        if nonneg(&x) && nonneg(&y) {
                            PosReal
                        } else {
                            Real
                        }
                    }
                    BinOp::Mul if x == UnitInterval && y == UnitInterval => UnitInterval,
                    _ => {
                        let j = self.join(&x, &y).unwrap_or(Real);
                        match j {
                            UnitInterval | Enum(_) => {
                                if op == BinOp::Add {
                                    if matches!(j, Enum(_)) {
                                        Nat
                                    } else {
                                        PosReal
                                    }
                                } else {
                                    j
                                }
                            }
                            other => other,
                        }
                    }
                })
            }
        }
    }

    fn prim(&mut self, scope: &mut Scope, e: &Expr, p: Prim, args: &[Expr]) -> Result<Ty, TypeError> {
        use Ty::*;
        let rule = "Prim";
        let mut tys = Vec::with_capacity(args.len());
        for a in args {
            tys.push(self.infer(scope, a)?);
        }
        let want = |c: &mut Self, i: usize, t: Ty| c.expect_sub(&args[i], rule, &tys[i], &t);
        match p {
            Prim::Uniform => Ok(Ty::dist(UnitInterval)),
            Prim::Bernoulli => {
                want(self, 0, UnitInterval)?;
                Ok(Ty::dist(Bool))
            }
            Prim::Beta => {
                want(self, 0, PosReal)?;
                want(self, 1, PosReal)?;
                Ok(Ty::dist(UnitInterval))
            }
            Prim::Normal => {
                want(self, 0, Real)?;
                want(self, 1, PosReal)?;
                Ok(Ty::dist(Real))
            }
            Prim::Dirichlet => {
                for i in 0..args.len() {
                    want(self, i, PosReal)?;
                }
                let k = args.len();
                Ok(Ty::dist(if k == 2 { UnitInterval } else { Tuple(vec![UnitInterval; k - 1]) }))
            }
            Prim::Multinomial => {
                for i in 0..args.len() {
                    want(self, i, UnitInterval)?;
                }
                Ok(Ty::dist(Enum(args.len() as u32 + 1)))
            }
            Prim::LapMech | Prim::GaussMech => {
                want(self, 0, PosReal)?;
                want(self, 1, Real)?;
                Ok(Ty::monad(Real))
            }
            Prim::ExpMech => {
                want(self, 0, Real)?;
                let out = self.fresh();
                let score = Ty::arrow(tys[2].clone(), Ty::arrow(out.clone(), Real));
                self.expect_sub(&args[1], rule, &tys[1], &score)?;
                if args.len() == 4 {
                    self.expect_sub(&args[3], rule, &tys[3], &Ty::list(out.clone()))?;
                } else {
                    match self.zonk(&out) {
                        Bool => {}
                        Var(_) => {
                            self.sub(&out, &Bool);
                        }
                        other => {
                            return self.err(e, rule, format!("expMech over {} needs an explicit candidate list", other));
                        }
                    }
                }
                Ok(Ty::monad(out))
            }
            Prim::GetParams => {
                let inner = match self.zonk(&tys[0]) {
                    Dist(t) => *t,
                    other => return self.err(&args[0], rule, format!("getParams expects D[_], found {}", other)),
                };
                let simple = inner.to_simple().and_then(|t| get_params_type(&t));
                match simple {
                    Some(t) => Ok(Ty::from_simple(&t)),
                    None => self.err(&args[0], rule, format!("no parameter family for D[{}]", inner)),
                }
            }
            Prim::GetMean => match self.zonk(&tys[0]) {
                Dist(t) if *t == Real => Ok(Real),
                Dist(t) if *t == UnitInterval => Ok(UnitInterval),
                Dist(t) if matches!(*t, Var(_)) => {
                    self.sub(&t, &Real);
                    Ok(Real)
                }
                other => self.err(&args[0], rule, format!("getMean expects D[real] or D[[0,1]], found {}", other)),
            },
            Prim::GaussSigma => {
                want(self, 0, PosReal)?;
                want(self, 1, PosReal)?;
                Ok(PosReal)
            }
            Prim::Hellinger | Prim::StatDist => {
                let a = self.fresh();
                self.expect_sub(&args[0], rule, &tys[0], &Ty::dist(a.clone()))?;
                self.expect_sub(&args[1], rule, &tys[1], &Ty::dist(a))?;
                Ok(UnitInterval)
            }
            Prim::Length => {
                let a = self.fresh();
                want(self, 0, Ty::list(a))?;
                Ok(Nat)
            }
            Prim::AtLeast => {
                want(self, 0, Real)?;
                want(self, 1, PosReal)?;
                Ok(PosReal)
            }
            Prim::Sqrt => {
                want(self, 0, PosReal)?;
                Ok(PosReal)
            }
            Prim::Exp => {
                want(self, 0, Real)?;
                Ok(PosReal)
            }
            Prim::Ln => {
                want(self, 0, PosReal)?;
                Ok(Real)
            }
            Prim::Abs => {
                want(self, 0, Real)?;
                Ok(PosReal)
            }
        }
    }
}

fn lit_ty(l: &Lit) -> Ty {
    match l {
        Lit::Unit => Ty::Unit,
        Lit::Bool(_) => Ty::Bool,
        Lit::Num(r) if r.is_zero() => Ty::UnitInterval,
        Lit::Num(r) => Ty::from_simple(&literal_type(r)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn ty(src: &str) -> Result<SimpleType, TypeError> {
        typecheck(&TypeEnv::new(), &parse(src).unwrap())
    }

    fn t(s: &str) -> SimpleType {
        crate::syntax::parse_type(s).unwrap()
    }

    #[test]
    fn bernoulli_of_unit_interval() {
        let env = TypeEnv::new().with("p", SimpleType::UnitInterval);
        assert_eq!(typecheck(&env, &parse("bernoulli(p)").unwrap()).unwrap(), t("D[bool]"));
        let env = TypeEnv::new().with("p", SimpleType::Real);
        assert!(typecheck(&env, &parse("bernoulli(p)").unwrap()).is_err());
    }

    #[test]
    fn infer_and_ran() {
        let env = TypeEnv::new().with("m", t("M[real]")).with("d", t("D[bool]"));
        assert_eq!(typecheck(&env, &parse("infer m").unwrap()).unwrap(), t("D[real]"));
        assert_eq!(typecheck(&env, &parse("ran d").unwrap()).unwrap(), t("M[bool]"));
    }

    #[test]
    fn observe_with_plain_bool_predicate_rejected() {
        let err = ty("observe x => x = true in ran bernoulli(0.5)").unwrap_err();
        assert_eq!(err.rule, "Observe");
        assert_eq!(ty("observe x => return (x = true) in ran bernoulli(0.5)").unwrap(), t("M[bool]"));
    }

    #[test]
    fn monad_nesting_rejected() {
        assert_eq!(ty("return (return 1)").unwrap_err().rule, "UnitM");
    }

    #[test]
    fn unbound_variable() {
        let err = ty("return y").unwrap_err();
        assert_eq!(err.rule, "Var");
    }

    #[test]
    fn unannotated_recursion_is_solved() {
        let src = "let rec learnBias dbn prior = match dbn with
                     | [] -> prior
                     | d :: dbs -> observe (fun r -> mlet z = ran bernoulli(r) in return (d = z)) (learnBias dbs prior)
                   in learnBias";
        assert_eq!(ty(src).unwrap(), t("list bool -> M[[0,1]] -> M[[0,1]]"));
    }

    #[test]
    fn signatures() {
        assert_eq!(primitive_signature("gaussMech").unwrap().to_string(), "pos * real -> M[real]");
        assert_eq!(primitive_signature("beta").unwrap().to_string(), "pos * pos -> D[[0,1]]");
        assert_eq!(get_params_type(&SimpleType::UnitInterval), Some(t("pos * pos")));
        assert_eq!(primitive_signature("expMech").unwrap().to_string(), "real * ('a -> 'b -> real) * 'a -> M['b]");
        assert!(primitive_signature("nope").is_none());
    }

    #[test]
    fn multinomial_is_finite_index() {
        assert_eq!(ty("multinomial(0.2, 0.3)").unwrap(), t("D[[3]]"));
        assert_eq!(ty("getParams(dirichlet(1, 2, 3))").unwrap(), t("pos * pos * pos"));
    }

    #[test]
    fn determinism() {
        let src = "fun (x : real) -> lapMech(1, x)";
        assert_eq!(ty(src).unwrap(), ty(src).unwrap());
    }
}
