//! Call-by-value interpreter with reified distributions.

mod shape;
mod value;

pub use shape::{recognize_conjugate_fold, recognize_likelihood, ConjugateFold, LikelihoodFamily, LikelihoodShape};
pub use value::{Closure, DistVal, Env, Real, Valuation, Value};

use std::cell::Cell as StdCell;
use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;


use crate::dist::{discretize, sym_grid_divergence, sym_hellinger_sq, Dist, FDivKind, Grid, GridPoint, SymDist, SymDistError};
use crate::infer::{alg_inf, conjugate_update, get_mean, get_params, Datum, InferError, Likelihood};
use crate::mech::{self, MechError, Window};
use crate::scalar::Scalar;
use crate::syntax::{BinOp, Expr, ExprKind, Lit, Param, Pattern, Prim, SourceSpan, UnOp};
use crate::types::SimpleType;

/// Grid resolutions and resource bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Cells for distributions over [0,1].
    pub grid_n: usize,
    /// Cells per side of the 2-simplex grid.
    pub simplex_n: usize,
    /// Cells for normal distributions (window of 16 standard deviations).
    pub normal_n: usize,
    /// Lattice resolution of Laplace and Gaussian outputs.
    pub mech_cells_per_unit: u32,
    /// Closure applications allowed per evaluation.
    pub fuel: u64,
    /// Maximum nesting of applications.
    pub max_depth: usize,
    /// Use closed-form conjugate updates when `observe` has a recognized likelihood.
    pub conjugate: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            grid_n: 1000,
            simplex_n: 200,
            normal_n: 400,
            mech_cells_per_unit: 10,
            fuel: 1_000_000,
            max_depth: 4000,
            conjugate: true,
        }
    }
}

impl EvalConfig {
    /// Default discretization grid for a symbolic distribution (`None` for finite families).
    pub fn grid_for<P: Scalar>(&self, s: &SymDist<P>) -> Result<Option<Grid>, SymDistError> {
        match s {
            SymDist::Dirichlet(a) if a.len() > 3 => Err(SymDistError::Unsupported("discretization", format!("dirichlet of dimension {}", a.len()))),
            SymDist::Normal(..) => Ok(Grid::default_for(s, self.normal_n, self.simplex_n)),
            _ => Ok(Grid::default_for(s, self.grid_n, self.simplex_n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalErrorKind {
    #[error("fuel exhausted after {0} applications")]
    FuelExhausted(u64),
    #[error("recursion deeper than {0}")]
    DepthExceeded(usize),
    #[error("observation has probability zero under the prior")]
    ZeroMassObservation,
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("dynamic type error: {0}")]
    Type(String),
    #[error("no pattern matches {0}")]
    MatchFailure(String),
    #[error("arithmetic error: {0}")]
    Arith(String),
    #[error(transparent)]
    Dist(#[from] SymDistError),
    #[error(transparent)]
    Mech(#[from] MechError),
    #[error(transparent)]
    Infer(#[from] InferError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub span: Option<SourceSpan>,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.span {
            Some(s) => write!(f, "{}: {}", s, self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

impl std::error::Error for EvalError {}

type R<T> = Result<T, EvalError>;

fn err<T>(span: &SourceSpan, kind: impl Into<EvalErrorKind>) -> R<T> {
    Err(EvalError { kind: kind.into(), span: Some(span.clone()) })
}

fn type_err<T>(span: &SourceSpan, msg: String) -> R<T> {
    err(span, EvalErrorKind::Type(msg))
}

/// Evaluates `e` with the free variables given by `theta`.
pub fn eval<'a, P: Scalar>(theta: &Valuation<'a, P>, e: &'a Expr, cfg: &EvalConfig) -> R<Value<'a, P>> {
    Evaluator::new(cfg.clone()).eval_closed(theta, e)
}

/// `observe binder => pred in prior` as a standalone operation on an evaluated prior.
pub fn observe_eval<'a, P: Scalar>(
    theta: &Valuation<'a, P>,
    binder: &'a Param,
    pred: &'a Expr,
    prior: &DistVal<'a, P>,
    span: &SourceSpan,
    cfg: &EvalConfig,
) -> R<Dist<Value<'a, P>, P>> {
    let ev = Evaluator::new(cfg.clone());
    let env = env_of(theta);
    let post = ev.observe(&env, binder, pred, prior, span)?;
    let d = post.dist().map_err(|e| EvalError { kind: e.into(), span: Some(span.clone()) })?;
    Ok(d.clone())
}

fn env_of<'a, P: Scalar>(theta: &Valuation<'a, P>) -> Env<'a, P> {
    theta.iter().fold(Env::default(), |env, (k, v)| env.bind(k.clone(), v.clone()))
}

/// Single-use interpreter state (fuel and depth counters).
pub struct Evaluator {
    pub cfg: EvalConfig,
    fuel: StdCell<u64>,
    depth: StdCell<usize>,
}

impl Evaluator {
    pub fn new(cfg: EvalConfig) -> Self {
        let fuel = StdCell::new(cfg.fuel);
        Evaluator { cfg, fuel, depth: StdCell::new(0) }
    }

    pub fn eval_closed<'a, P: Scalar>(&self, theta: &Valuation<'a, P>, e: &'a Expr) -> R<Value<'a, P>> {
        self.eval(&env_of(theta), e)
    }

    /// Applies a function value to arguments in turn.
    pub fn apply_all<'a, P: Scalar>(&self, f: Value<'a, P>, args: impl IntoIterator<Item = Value<'a, P>>, span: &SourceSpan) -> R<Value<'a, P>> {
        args.into_iter().try_fold(f, |acc, a| self.apply(acc, a, span))
    }

    pub fn apply<'a, P: Scalar>(&self, f: Value<'a, P>, arg: Value<'a, P>, span: &SourceSpan) -> R<Value<'a, P>> {
        let clo = match f {
            Value::Closure(c) => c,
            other => return type_err(span, format!("applying a {} as a function", other.kind())),
        };
        let left = self.fuel.get();
        if left == 0 {
            return err(span, EvalErrorKind::FuelExhausted(self.cfg.fuel));
        }
        self.fuel.set(left - 1);
        let mut env = clo.env.clone();
        if let Some(name) = clo.rec_name {
            env = env.bind(name, Value::Closure(clo.clone()));
        }
        let env = self.bind_pattern(&env, &clo.params[0].pat, arg, span)?;
        if clo.params.len() > 1 {
            return Ok(Value::Closure(Arc::new(Closure { params: &clo.params[1..], body: clo.body, env, rec_name: None })));
        }
        let d = self.depth.get();
        if d >= self.cfg.max_depth {
            return err(span, EvalErrorKind::DepthExceeded(self.cfg.max_depth));
        }
        self.depth.set(d + 1);
        let r = stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || self.eval(&env, clo.body));
        self.depth.set(d);
        r
    }

    fn bind_pattern<'a, P: Scalar>(&self, env: &Env<'a, P>, pat: &'a Pattern, v: Value<'a, P>, span: &SourceSpan) -> R<Env<'a, P>> {
        match self.try_bind(env, pat, v.clone()) {
            Some(e) => Ok(e),
            None => err(span, EvalErrorKind::MatchFailure(v.to_string())),
        }
    }

    fn try_bind<'a, P: Scalar>(&self, env: &Env<'a, P>, pat: &'a Pattern, v: Value<'a, P>) -> Option<Env<'a, P>> {
        match (pat, &v) {
            (Pattern::Wild, _) => Some(env.clone()),
            (Pattern::Var(x), _) => Some(env.bind(x.as_str(), v)),
            (Pattern::Lit(l), _) => {
                let lv = lit_value::<P>(l);
                lv.same(&v).unwrap_or(false).then(|| env.clone())
            }
            (Pattern::Nil, Value::List(l)) => l.is_empty().then(|| env.clone()),
            (Pattern::Cons(h, t), Value::List(l)) => {
                let (first, rest) = l.split_first()?;
                let env = self.try_bind(env, h, first.clone())?;
                self.try_bind(&env, t, Value::list(rest.to_vec()))
            }
            (Pattern::Tuple(ps), Value::Tuple(vs)) if ps.len() == vs.len() => {
                let mut env = env.clone();
                for (p, x) in ps.iter().zip(vs.iter()) {
                    env = self.try_bind(&env, p, x.clone())?;
                }
                Some(env)
            }
            _ => None,
        }
    }

    fn eval_dist<'a, P: Scalar>(&self, env: &Env<'a, P>, e: &'a Expr) -> R<Arc<DistVal<'a, P>>> {
        match self.eval(env, e)? {
            Value::Dist(d) => Ok(d),
            other => type_err(&e.span, format!("expected a distribution, found {}", other.kind())),
        }
    }

    fn eval_num<'a, P: Scalar>(&self, env: &Env<'a, P>, e: &'a Expr) -> R<P> {
        match self.eval(env, e)? {
            Value::Num(r) => Ok(r.val),
            other => type_err(&e.span, format!("expected a number, found {}", other.kind())),
        }
    }

    fn eval_sym<'a, P: Scalar>(&self, env: &Env<'a, P>, e: &'a Expr) -> R<Arc<SymDist<P>>> {
        match self.eval(env, e)? {
            Value::Sym(s) => Ok(s),
            other => type_err(&e.span, format!("expected a symbolic distribution, found {}", other.kind())),
        }
    }

    fn pmf<'a, 'd, P: Scalar>(&self, d: &'d DistVal<'a, P>, span: &SourceSpan) -> R<&'d Dist<Value<'a, P>, P>> {
        d.dist().map_err(|e| EvalError { kind: e.into(), span: Some(span.clone()) })
    }

    pub fn eval<'a, P: Scalar>(&self, env: &Env<'a, P>, e: &'a Expr) -> R<Value<'a, P>> {
        let sp = &e.span;
        match &e.kind {
            ExprKind::Var(x) => match env.lookup(x) {
                Some(v) => Ok(v.clone()),
                None => err(sp, EvalErrorKind::Unbound(x.clone())),
            },
            ExprKind::Lit(l) => Ok(lit_value(l)),
            ExprKind::Nil => Ok(Value::list(Vec::new())),
            ExprKind::Tuple(es) => Ok(Value::tuple(es.iter().map(|x| self.eval(env, x)).collect::<R<Vec<_>>>()?)),
            ExprKind::Cons(h, t) => {
                let hv = self.eval(env, h)?;
                match self.eval(env, t)? {
                    Value::List(l) => {
                        let mut v = Vec::with_capacity(l.len() + 1);
                        v.push(hv);
                        v.extend(l.iter().cloned());
                        Ok(Value::list(v))
                    }
                    other => type_err(&t.span, format!("cons onto a {}", other.kind())),
                }
            }
            ExprKind::App(f, a) => {
                let fv = self.eval(env, f)?;
                let av = self.eval(env, a)?;
                self.apply(fv, av, sp)
            }
            ExprKind::Lam(p, body) => Ok(Value::Closure(Arc::new(Closure {
                params: std::slice::from_ref(p),
                body,
                env: env.clone(),
                rec_name: None,
            }))),
            ExprKind::Let(p, bound, rest) => {
                let v = self.eval(env, bound)?;
                let env = self.bind_pattern(env, &p.pat, v, &bound.span)?;
                self.eval(&env, rest)
            }
            ExprKind::LetRec { name, params, body, rest } => {
                if params.is_empty() {
                    return type_err(sp, format!("`let rec {}` needs at least one parameter", name));
                }
                let clo = Value::Closure(Arc::new(Closure { params, body, env: env.clone(), rec_name: Some(name.as_str()) }));
                self.eval(&env.bind(name.as_str(), clo), rest)
            }
            ExprKind::If(c, a, b) => match self.eval(env, c)? {
                Value::Bool(true) => self.eval(env, a),
                Value::Bool(false) => self.eval(env, b),
                other => type_err(&c.span, format!("condition is a {}", other.kind())),
            },
            ExprKind::Match(s, arms) => {
                let v = self.eval(env, s)?;
                for arm in arms {
                    if let Some(env2) = self.try_bind(env, &arm.pat, v.clone()) {
                        return self.eval(&env2, &arm.body);
                    }
                }
                err(sp, EvalErrorKind::MatchFailure(v.to_string()))
            }
            ExprKind::BinOp(op, a, b) => self.binop(env, *op, a, b, sp),
            ExprKind::UnOp(UnOp::Not, a) => match self.eval(env, a)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                other => type_err(&a.span, format!("`not` of a {}", other.kind())),
            },
            ExprKind::UnOp(UnOp::Neg, a) => Ok(Value::num(-self.eval_num(env, a)?)),
            ExprKind::Prim(p, args) => self.prim(env, *p, args, sp),
            ExprKind::Return(a) => Ok(Value::dist(Dist::point(self.eval(env, a)?))),
            ExprKind::MLet(p, head, body) => {
                let hd = self.eval_dist(env, head)?;
                let pmf = self.pmf(&hd, &head.span)?;
                let mut acc = Vec::new();
                for (v, w) in pmf.iter() {
                    let env2 = self.bind_pattern(env, &p.pat, v.clone(), &head.span)?;
                    let bd = self.eval_dist(&env2, body)?;
                    for (x, q) in self.pmf(&bd, &body.span)?.iter() {
                        acc.push((x.clone(), w.clone() * q.clone()));
                    }
                }
                Ok(Value::dist(Dist::from_merged(acc)))
            }
            ExprKind::Observe { binder, pred, prior } => {
                let pd = self.eval_dist(env, prior)?;
                Ok(Value::Dist(Arc::new(self.observe(env, binder, pred, &pd, sp)?)))
            }
            ExprKind::Infer(a) => {
                let d = self.eval_dist(env, a)?;
                if let Some(s) = d.source() {
                    return Ok(Value::sym(s.clone()));
                }
                let pmf = self.pmf(&d, &a.span)?;
                let mut pts = Vec::with_capacity(pmf.len());
                for (v, p) in pmf.iter() {
                    match v.to_grid_point() {
                        Some(g) => pts.push((g, p.clone())),
                        None => {
                            let e = InferError::NoFamilyMatch(format!("support point {} is not a grid value", v));
                            return err(sp, e);
                        }
                    }
                }
                let gd: Dist<GridPoint<P>, P> = Dist::from_merged(pts);
                match alg_inf(&gd, None) {
                    Ok(s) => Ok(Value::sym(s)),
                    Err(e) => err(sp, e),
                }
            }
            ExprKind::Ran(a) => {
                let s = self.eval_sym(env, a)?;
                self.ran((*s).clone(), sp)
            }
        }
    }

    fn ran<'a, P: Scalar>(&self, s: SymDist<P>, sp: &SourceSpan) -> R<Value<'a, P>> {
        match self.cfg.grid_for(&s) {
            Ok(g) => Ok(Value::Dist(Arc::new(DistVal::symbolic(s, g)))),
            Err(e) => err(sp, e),
        }
    }

    /// Bayes filtering of `prior` by the probability that `pred` returns `true`.
    pub fn observe<'a, P: Scalar>(&self, env: &Env<'a, P>, binder: &'a Param, pred: &'a Expr, prior: &DistVal<'a, P>, sp: &SourceSpan) -> R<DistVal<'a, P>> {
        if self.cfg.conjugate {
            if let Some(post) = self.observe_conjugate(env, binder, pred, prior)? {
                return Ok(post);
            }
        }
        let pmf = self.pmf(prior, sp)?;
        let mut acc = Vec::with_capacity(pmf.len());
        for (v, p) in pmf.iter() {
            let env2 = self.bind_pattern(env, &binder.pat, v.clone(), sp)?;
            let q = self.eval_dist(&env2, pred)?;
            let w = self.pmf(&q, &pred.span)?.mass(&Value::Bool(true));
            if !w.is_zero() {
                acc.push((v.clone(), p.clone() * w));
            }
        }
        match Dist::normalized(acc) {
            Ok(d) => Ok(DistVal::explicit(d)),
            Err(_) => err(sp, EvalErrorKind::ZeroMassObservation),
        }
    }

    fn observe_conjugate<'a, P: Scalar>(&self, env: &Env<'a, P>, binder: &'a Param, pred: &'a Expr, prior: &DistVal<'a, P>) -> R<Option<DistVal<'a, P>>> {
        let Some(src) = prior.source() else { return Ok(None) };
        let Some(shape) = recognize_likelihood(binder, pred) else { return Ok(None) };
        let d = self.eval(env, shape.datum)?;
        let (lik, datum) = match (shape.family, &d) {
            (LikelihoodFamily::Bernoulli, Value::Bool(b)) => (Likelihood::Bernoulli, Datum::Bool(*b)),
            (LikelihoodFamily::Multinomial { .. }, Value::Num(r)) => match r.val.to_u32() {
                Some(i) if P::from_u32(i).as_ref() == Some(&r.val) => (Likelihood::Multinomial, Datum::Index(i)),
                _ => return Ok(None),
            },
            (LikelihoodFamily::Normal { kv }, Value::Num(r)) => {
                let kv = self.eval_num(env, kv)?;
                let x = match &r.cell {
                    Some(c) => c.rep.clone(),
                    None => lattice_rep(&r.val, &kv, self.cfg.normal_n),
                };
                (Likelihood::Normal { kv }, Datum::Real(x))
            }
            _ => return Ok(None),
        };
        if let (Likelihood::Multinomial, SymDist::Dirichlet(a), LikelihoodFamily::Multinomial { arity }) = (&lik, src, shape.family) {
            if a.len() != arity + 1 {
                return Ok(None);
            }
        }
        let Some(post) = conjugate_update(src, &lik, &datum) else { return Ok(None) };
        let grid = self.cfg.grid_for(&post).map_err(|e| EvalError { kind: e.into(), span: Some(pred.span.clone()) })?;
        Ok(Some(DistVal::symbolic(post, grid)))
    }

    fn binop<'a, P: Scalar>(&self, env: &Env<'a, P>, op: BinOp, a: &'a Expr, b: &'a Expr, sp: &SourceSpan) -> R<Value<'a, P>> {
        match op {
            BinOp::And | BinOp::Or => {
                let l = match self.eval(env, a)? {
                    Value::Bool(x) => x,
                    other => return type_err(&a.span, format!("boolean operator on a {}", other.kind())),
                };
                if (op == BinOp::And && !l) || (op == BinOp::Or && l) {
                    return Ok(Value::Bool(l));
                }
                match self.eval(env, b)? {
                    Value::Bool(x) => Ok(Value::Bool(x)),
                    other => type_err(&b.span, format!("boolean operator on a {}", other.kind())),
                }
            }
            BinOp::Eq | BinOp::Ne => {
                let (x, y) = (self.eval(env, a)?, self.eval(env, b)?);
                match x.same(&y) {
                    Some(t) => Ok(Value::Bool(if op == BinOp::Eq { t } else { !t })),
                    None => type_err(sp, format!("comparing a {} with a {}", x.kind(), y.kind())),
                }
            }
            _ => {
                let (x, y) = (self.eval_num(env, a)?, self.eval_num(env, b)?);
                let o = x.total_cmp(&y);
                Ok(match op {
                    BinOp::Lt => Value::Bool(o == Ordering::Less),
                    BinOp::Le => Value::Bool(o != Ordering::Greater),
                    BinOp::Gt => Value::Bool(o == Ordering::Greater),
                    BinOp::Ge => Value::Bool(o != Ordering::Less),
                    BinOp::Add => Value::num(x + y),
                    BinOp::Sub => Value::num(x - y),
                    BinOp::Mul => Value::num(x * y),
                    BinOp::Div => {
                        if y.is_zero() {
                            return err(sp, EvalErrorKind::Arith("division by zero".into()));
                        }
                        Value::num(x / y)
                    }
                    _ => unreachable!("boolean and equality operators handled above"),
                })
            }
        }
    }

    fn prim<'a, P: Scalar>(&self, env: &Env<'a, P>, p: Prim, args: &'a [Expr], sp: &SourceSpan) -> R<Value<'a, P>> {
        let nums = |me: &Self| args.iter().map(|a| me.eval_num(env, a)).collect::<R<Vec<P>>>();
        let sym = |r: Result<SymDist<P>, SymDistError>| match r {
            Ok(s) => Ok(Value::sym(s)),
            Err(e) => err(sp, e),
        };
        let f64_of = |x: &P| x.to_f64_lossy();
        match p {
            Prim::Uniform => Ok(Value::sym(SymDist::Uniform)),
            Prim::Bernoulli => sym(SymDist::bernoulli(nums(self)?.remove(0))),
            Prim::Beta => {
                let v = nums(self)?;
                sym(SymDist::beta(v[0].clone(), v[1].clone()))
            }
            Prim::Normal => {
                let v = nums(self)?;
                sym(SymDist::normal(v[0].clone(), v[1].clone()))
            }
            Prim::Dirichlet => sym(SymDist::dirichlet(nums(self)?)),
            Prim::Multinomial => sym(SymDist::multinomial(nums(self)?)),
            Prim::LapMech | Prim::GaussMech => {
                let v = nums(self)?;
                let (scale, x) = (&v[0], &v[1]);
                let cpu = self.cfg.mech_cells_per_unit;
                let out = if p == Prim::LapMech {
                    mech::laplace_mech(scale, x, &Window::laplace(f64_of(x), f64_of(scale), cpu))
                } else {
                    mech::gauss_mech(scale, x, &Window::gauss(f64_of(x), f64_of(scale), cpu))
                };
                match out {
                    Ok(d) => Ok(Value::dist(d.map(|c| Value::Num(Real::in_cell(c.clone()))))),
                    Err(e) => err(sp, e),
                }
            }
            Prim::ExpMech => {
                let eps = self.eval_num(env, &args[0])?;
                let score = self.eval(env, &args[1])?;
                let db = self.eval(env, &args[2])?;
                let outs: Vec<Value<'a, P>> = if args.len() == 4 {
                    match self.eval(env, &args[3])? {
                        Value::List(l) => l.to_vec(),
                        other => return type_err(&args[3].span, format!("candidate outputs must be a list, found {}", other.kind())),
                    }
                } else {
                    vec![Value::Bool(false), Value::Bool(true)]
                };
                let partial = self.apply(score, db, sp)?;
                let mut scored = Vec::with_capacity(outs.len());
                for o in outs {
                    match self.apply(partial.clone(), o.clone(), sp)? {
                        Value::Num(r) => scored.push((o, r.val)),
                        other => return type_err(&args[1].span, format!("score returned a {}", other.kind())),
                    }
                }
                match mech::exp_mech(&eps, scored) {
                    Ok(d) => Ok(Value::dist(d)),
                    Err(e) => err(sp, e),
                }
            }
            Prim::GetParams => {
                let s = self.eval_sym(env, &args[0])?;
                let ps = get_params(&s);
                Ok(if ps.len() == 1 {
                    Value::num(ps[0].clone())
                } else {
                    Value::tuple(ps.into_iter().map(Value::num).collect())
                })
            }
            Prim::GetMean => {
                let s = self.eval_sym(env, &args[0])?;
                match get_mean(&s) {
                    Ok(m) => Ok(Value::num(m)),
                    Err(e) => err(sp, e),
                }
            }
            Prim::GaussSigma => {
                let v = nums(self)?;
                match mech::gauss_sigma(f64_of(&v[0]), f64_of(&v[1])) {
                    Ok(s) => Ok(Value::num(P::from_f64_lossy(s))),
                    Err(e) => err(sp, e),
                }
            }
            Prim::Hellinger | Prim::StatDist => {
                let s1 = self.eval_sym(env, &args[0])?;
                let s2 = self.eval_sym(env, &args[1])?;
                let (n, sn) = (self.cfg.grid_n, self.cfg.simplex_n);
                let r = if p == Prim::Hellinger {
                    sym_hellinger_sq(&s1, &s2, n, sn).map(|h2| h2.max(0.0).sqrt())
                } else {
                    statdist(&s1, &s2, n, sn)
                };
                match r {
                    Ok(x) => Ok(Value::num(P::from_f64_lossy(x))),
                    Err(e) => err(sp, e),
                }
            }
            Prim::Length => match self.eval(env, &args[0])? {
                Value::List(l) => Ok(Value::num(P::from_usize(l.len()).unwrap())),
                other => type_err(&args[0].span, format!("length of a {}", other.kind())),
            },
            Prim::AtLeast => {
                let v = nums(self)?;
                Ok(Value::num(P::max_of(v[0].clone(), v[1].clone())))
            }
            Prim::Sqrt => {
                let x = nums(self)?.remove(0);
                if x < P::zero() {
                    return err(sp, EvalErrorKind::Arith(format!("sqrt of {}", x)));
                }
                Ok(Value::num(x.sqrt()))
            }
            Prim::Exp => Ok(Value::num(nums(self)?.remove(0).exp())),
            Prim::Ln => {
                let x = nums(self)?.remove(0);
                if !(x > P::zero()) {
                    return err(sp, EvalErrorKind::Arith(format!("ln of {}", x)));
                }
                Ok(Value::num(x.ln()))
            }
            Prim::Abs => Ok(Value::num(nums(self)?.remove(0).abs())),
        }
    }
}

/// Statistical distance; exact for finite families.
fn statdist<P: Scalar>(s1: &SymDist<P>, s2: &SymDist<P>, n: usize, sn: usize) -> Result<f64, SymDistError> {
    match (s1, s2) {
        (SymDist::Bernoulli(_) | SymDist::Multinomial(_), SymDist::Bernoulli(_) | SymDist::Multinomial(_)) => {
            let g = Grid::Unit { n: 2 };
            Ok(crate::dist::fdiv(FDivKind::SD, &discretize(s1, &g)?, &discretize(s2, &g)?))
        }
        _ => sym_grid_divergence(FDivKind::SD, s1, s2, n, sn),
    }
}

/// Representative of the normal-lattice cell (width `16 sqrt(kv) / n`) containing `x`.
fn lattice_rep<P: Scalar>(x: &P, kv: &P, n: usize) -> P {
    let w = Grid::normal_lattice_width(kv.to_f64_lossy(), n);
    let k = (x.to_f64_lossy() / w).floor();
    P::from_f64_lossy((k + 0.5) * w)
}

pub fn lit_value<'a, P: Scalar>(l: &Lit) -> Value<'a, P> {
    match l {
        Lit::Unit => Value::Unit,
        Lit::Bool(b) => Value::Bool(*b),
        Lit::Num(r) => Value::num(P::from_rational(r)),
    }
}

/// Whether `v` lies in the interpretation of `t` (masses and grids are not re-checked).
pub fn inhabits<P: Scalar>(v: &Value<'_, P>, t: &SimpleType) -> bool {
    let zero = P::zero();
    let one = P::one();
    match (t, v) {
        (SimpleType::Unit, Value::Unit) => true,
        (SimpleType::Bool, Value::Bool(_)) => true,
        (SimpleType::Real, Value::Num(_)) => true,
        (SimpleType::PosReal | SimpleType::ExtPosReal, Value::Num(r)) => r.val >= zero,
        (SimpleType::UnitInterval, Value::Num(r)) => r.val >= zero && r.val <= one,
        (SimpleType::Nat, Value::Num(r)) => r.val >= zero && r.val.to_u64().and_then(P::from_u64).as_ref() == Some(&r.val),
        (SimpleType::Enum(k), Value::Num(r)) => r.val.to_u32().map_or(false, |i| i < *k && P::from_u32(i).as_ref() == Some(&r.val)),
        (SimpleType::List(e), Value::List(l)) => l.iter().all(|x| inhabits(x, e)),
        (SimpleType::Tuple(ts), Value::Tuple(vs)) => ts.len() == vs.len() && ts.iter().zip(vs.iter()).all(|(t, x)| inhabits(x, t)),
        (SimpleType::Monad(e), Value::Dist(d)) => d.dist().map_or(false, |pmf| pmf.support().all(|x| inhabits(x, e))),
        (SimpleType::Dist(e), Value::Sym(s)) => sym_inhabits(s, e),
        (SimpleType::Arrow(..), Value::Closure(_)) => true,
        _ => false,
    }
}

fn sym_inhabits<P: Scalar>(s: &SymDist<P>, t: &SimpleType) -> bool {
    match (s, t) {
        (SymDist::Bernoulli(_), SimpleType::Bool) => true,
        (SymDist::Beta(..) | SymDist::Uniform, SimpleType::UnitInterval) => true,
        (SymDist::Normal(..), SimpleType::Real) => true,
        (SymDist::Dirichlet(a), SimpleType::UnitInterval) => a.len() == 2,
        (SymDist::Dirichlet(a), SimpleType::Tuple(ts)) => a.len() == ts.len() + 1,
        (SymDist::Multinomial(p), SimpleType::Enum(k)) => p.len() + 1 == *k as usize,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use crate::syntax::parse;
    use num_rational::BigRational;

    fn run_q(src: &str) -> Dist<Value<'static, BigRational>, BigRational> {
        let e: &'static Expr = Box::leak(Box::new(parse(src).unwrap()));
        match eval(&Valuation::new(), e, &EvalConfig::default()).unwrap() {
            Value::Dist(d) => d.dist().unwrap().clone(),
            other => panic!("{}", other),
        }
    }

    fn run_f(src: &str, cfg: &EvalConfig) -> Result<Value<'static, f64>, EvalError> {
        let e: &'static Expr = Box::leak(Box::new(parse(src).unwrap()));
        eval(&Valuation::new(), e, cfg)
    }

    fn q(n: i64, d: i64) -> BigRational {
        ratio(n, d)
    }

    #[test]
    fn return_is_a_point_mass() {
        let d = run_q("return 3");
        assert_eq!(d.len(), 1);
        assert_eq!(d.mass(&Value::num(q(3, 1))), q(1, 1));
    }

    #[test]
    fn ran_bernoulli_is_exact() {
        let d = run_q("ran bernoulli(0.3)");
        assert_eq!(d.mass(&Value::Bool(true)), q(3, 10));
        assert_eq!(d.mass(&Value::Bool(false)), q(7, 10));
    }

    #[test]
    fn bind_negates() {
        let d = run_q("mlet x = ran bernoulli(0.3) in return (not x)");
        assert_eq!(d.mass(&Value::Bool(true)), q(7, 10));
    }

    #[test]
    fn observe_noisy_channel() {
        let d = run_q("observe x => (mlet y = ran bernoulli(0.8) in return (x = y)) in ran bernoulli(0.5)");
        assert_eq!(d.mass(&Value::Bool(true)), q(4, 5));
    }

    #[test]
    fn observe_impossible_event_reports_zero_mass() {
        let e = run_f("observe x => return false in ran bernoulli(0.5)", &EvalConfig::default()).unwrap_err();
        assert_eq!(e.kind, EvalErrorKind::ZeroMassObservation);
        assert!(e.span.is_some());
    }

    #[test]
    fn conjugate_and_grid_paths_agree() {
        let src = "infer (observe r => (mlet z = ran bernoulli(r) in return (true = z)) in ran uniform())";
        let fast = run_f(src, &EvalConfig::default()).unwrap();
        assert_eq!(fast.as_sym(), Some(&SymDist::Beta(2.0, 1.0)));
        let cfg = EvalConfig { conjugate: false, grid_n: 10_000, ..EvalConfig::default() };
        match run_f(src, &cfg).unwrap().as_sym() {
            Some(SymDist::Beta(a, b)) => assert!((a - 2.0).abs() < 1e-2 && (b - 1.0).abs() < 1e-2, "{} {}", a, b),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn exp_mech_over_bool() {
        let v = run_f("expMech(2, fun db out -> if out then db else 0, 1)", &EvalConfig::default()).unwrap();
        let d = v.as_dist().unwrap().dist().unwrap();
        let want = 1.0f64.exp() / (1.0f64.exp() + 1.0);
        assert!((d.mass(&Value::Bool(true)) - want).abs() < 1e-12);
    }

    #[test]
    fn laplace_output_is_normalized_and_symmetric() {
        let v = run_f("lapMech(1, 0)", &EvalConfig::default()).unwrap();
        let d = v.as_dist().unwrap().dist().unwrap();
        let total: f64 = d.masses_f64().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let ms = d.masses_f64();
        for (a, b) in ms.iter().zip(ms.iter().rev()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn recursion_over_list() {
        let v = run_f("let rec len l = match l with | [] -> 0 | _ :: t -> 1 + len t in len [1; 2; 3; 4]", &EvalConfig::default()).unwrap();
        assert_eq!(v.as_num(), Some(&4.0));
    }

    #[test]
    fn divergence_runs_out_of_fuel() {
        let cfg = EvalConfig { fuel: 100, ..EvalConfig::default() };
        let e = run_f("let rec f x = f x in f 1", &cfg).unwrap_err();
        assert_eq!(e.kind, EvalErrorKind::FuelExhausted(100));
    }

    #[test]
    fn deep_recursion_hits_depth_limit() {
        let cfg = EvalConfig { max_depth: 50_000, ..EvalConfig::default() };
        let e = run_f("let rec f x = 1 + f x in f 1", &cfg).unwrap_err();
        assert_eq!(e.kind, EvalErrorKind::DepthExceeded(50_000));
    }

    #[test]
    fn inhabits_checks_refinement_ranges() {
        assert!(inhabits::<f64>(&Value::num(0.5), &SimpleType::UnitInterval));
        assert!(!inhabits::<f64>(&Value::num(1.5), &SimpleType::UnitInterval));
        assert!(inhabits::<f64>(&Value::sym(SymDist::Beta(1.0, 2.0)), &SimpleType::Dist(Box::new(SimpleType::UnitInterval))));
    }
}
