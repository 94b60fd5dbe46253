//! Bidirectional relational type checking against user annotations.
//!
//! Expressions are checked against a relational type; verification conditions are
//! discharged as they are generated and recorded in a derivation tree that can be replayed.

use std::cell::Cell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::assertion::Assertion;
use super::discharge::{canonical, discharge, equal_terms, prove, sensitivity, Outcome, Vc};
use super::parse::RtFile;
use super::term::{FIdx, Poly, Side, Term};
use super::types::RelType;
use crate::eval::{recognize_conjugate_fold, recognize_likelihood, LikelihoodFamily};
use crate::syntax::{pretty, Expr, ExprKind, Lit, Param, Pattern, Prim, UnOp};
use crate::types::{typecheck, SimpleType, TypeEnv};

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[error("{span}: [{rule}] {msg}")]
pub struct RelError {
    pub rule: String,
    pub span: String,
    pub msg: String,
}

type R<T> = Result<T, RelError>;

/// Ordered relational bindings; rebinding a name replaces the old entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelEnv {
    binds: Vec<(String, RelType)>,
}

impl RelEnv {
    pub fn new() -> RelEnv {
        RelEnv::default()
    }

    pub fn with(mut self, name: &str, t: RelType) -> RelEnv {
        self.insert(name, t);
        self
    }

    pub fn insert(&mut self, name: &str, t: RelType) {
        self.binds.retain(|(n, _)| n != name);
        self.binds.push((name.to_string(), t));
    }

    pub fn get(&self, name: &str) -> Option<&RelType> {
        self.binds.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RelType)> {
        self.binds.iter().map(|(n, t)| (n.as_str(), t))
    }

    fn erasure(&self) -> TypeEnv {
        let mut env = TypeEnv::new();
        for (n, t) in &self.binds {
            env.insert(n, t.erase());
        }
        env
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VcResult {
    pub vc: Vc,
    pub outcome: Outcome,
}

/// One rule application with its premises and discharged side conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub rule: String,
    pub span: String,
    pub judgement: String,
    pub vcs: Vec<VcResult>,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn all_vcs(&self) -> Vec<&VcResult> {
        let mut out: Vec<&VcResult> = self.vcs.iter().collect();
        for p in &self.premises {
            out.extend(p.all_vcs());
        }
        out
    }

    pub fn unproved(&self) -> Vec<&VcResult> {
        self.all_vcs().into_iter().filter(|v| !v.outcome.is_proved()).collect()
    }

    pub fn accepted(&self) -> bool {
        self.unproved().is_empty()
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    fn rules(&self, out: &mut Vec<String>) {
        out.push(self.rule.clone());
        self.premises.iter().for_each(|p| p.rules(out));
    }

    /// Rule names in pre-order.
    pub fn rule_names(&self) -> Vec<String> {
        let mut v = Vec::new();
        self.rules(&mut v);
        v
    }
}

/// Names of the rules a derivation may contain.
pub const RULES: &[&str] = &[
    "Program", "Def", "Lam", "Let", "Match", "Match-Phi", "If", "LetRec", "Refl", "Val", "UnitM", "BindM", "Lap", "Gauss", "Exp", "Var", "App",
    "Infer", "Ran", "Observe", "Fold", "Top", "Sub",
];

/// Checks `e` against `t` under `env` with no top-level definitions in scope.
pub fn relcheck(env: &RelEnv, e: &Expr, t: &RelType) -> R<Derivation> {
    let c = Checker::new(Globals::default());
    let ctx = c.initial(env);
    c.check(&ctx, e, t)
}

/// Verification conditions of `t <= u` under `env`.
pub fn subtype(env: &RelEnv, t: &RelType, u: &RelType) -> R<Vec<Vc>> {
    let c = Checker::new(Globals::default());
    let ctx = c.initial(env);
    c.sub(&ctx, t, u, "Sub", "<subtype>")
}

/// Checks every annotated top-level definition of `prog`; `main` must be annotated.
pub fn relcheck_program(prog: &Expr, rt: &RtFile) -> R<Derivation> {
    if let Err(e) = typecheck(&TypeEnv::new(), prog) {
        if e.rule != "Annot" {
            return Err(RelError { rule: "Erasure".into(), span: e.span.to_string(), msg: e.to_string() });
        }
    }
    let mut c = Checker::new(Globals::default());
    let mut premises = Vec::new();
    let mut cur = prog;
    loop {
        match &cur.kind {
            ExprKind::Let(p, val, rest) => {
                let name = p.name().ok_or_else(|| err("Program", cur, "top-level pattern bindings are not supported"))?.to_string();
                let (params, body) = peel_lams(val);
                c.g.defs.push(TopDef { name: name.clone(), params: params.clone(), body: body.clone(), rec: false });
                if let Some(d) = rt.get(&name) {
                    let ctx = c.initial(&RelEnv::new());
                    premises.push(c.check_def(&ctx, &name, &params, body, &d.ty)?);
                    c.g.annotated.insert(name, d.ty.clone());
                } else {
                    c.g.code.insert(name, (params, body.clone()));
                }
                cur = rest;
            }
            ExprKind::LetRec { name, params, body, rest } => {
                c.g.defs.push(TopDef { name: name.clone(), params: params.clone(), body: (**body).clone(), rec: true });
                if let Some(d) = rt.get(name) {
                    c.g.annotated.insert(name.clone(), d.ty.clone());
                    let ctx = c.initial(&RelEnv::new());
                    premises.push(c.check_def(&ctx, name, params, body, &d.ty)?);
                } else if let Some(f) = recognize_conjugate_fold(name, params, body) {
                    let (family, kv) = match f.family {
                        LikelihoodFamily::Bernoulli => ("bernoulli", None),
                        LikelihoodFamily::Normal { kv } => ("normal", Some(kv.clone())),
                        LikelihoodFamily::Multinomial { .. } => ("multinomial", None),
                    };
                    let extra = f.extra_params.iter().map(|s| s.to_string()).collect();
                    c.g.folds.insert(name.clone(), FoldInfo { family, extra, kv });
                }
                cur = rest;
            }
            ExprKind::Var(x) if x == "main" => break,
            _ => return Err(err("Program", cur, "expected top-level declarations ending in main")),
        }
    }
    for d in &rt.decls {
        if !c.g.defs.iter().any(|t| t.name == d.name) {
            return Err(RelError { rule: "Program".into(), span: d.span.to_string(), msg: format!("annotation for unknown definition {}", d.name) });
        }
    }
    if rt.get("main").is_none() {
        return Err(err("Program", prog, "main has no relational annotation"));
    }
    Ok(Derivation { rule: "Program".into(), span: prog.span.to_string(), judgement: "|- program".into(), vcs: vec![], premises })
}

/// Re-discharges every verification condition of a derivation and compares outcomes.
pub fn replay(d: &Derivation) -> Result<usize, String> {
    if !RULES.contains(&d.rule.as_str()) {
        return Err(format!("unknown rule {}", d.rule));
    }
    let mut n = 0;
    for v in &d.vcs {
        if v.vc.rule != d.rule {
            return Err(format!("condition of rule {} recorded under {}", v.vc.rule, d.rule));
        }
        let again = discharge(&v.vc);
        if again != v.outcome {
            return Err(format!("{} at {}: recorded {:?}, replayed {:?}", v.vc.rule, v.vc.span, v.outcome, again));
        }
        n += 1;
    }
    for p in &d.premises {
        n += replay(p)?;
    }
    Ok(n)
}

/// Recomputes the derivation of `prog` and compares it with `d` before replaying it.
pub fn replay_program(prog: &Expr, rt: &RtFile, d: &Derivation) -> Result<usize, String> {
    let fresh = relcheck_program(prog, rt).map_err(|e| e.to_string())?;
    if &fresh != d {
        return Err("derivation differs from the recomputed one".into());
    }
    replay(d)
}

fn err(rule: &str, e: &Expr, msg: impl Into<String>) -> RelError {
    RelError { rule: rule.into(), span: e.span.to_string(), msg: msg.into() }
}

fn peel_lams(e: &Expr) -> (Vec<Param>, &Expr) {
    let mut params = Vec::new();
    let mut cur = e;
    while let ExprKind::Lam(p, b) = &cur.kind {
        params.push(p.clone());
        cur = b;
    }
    (params, cur)
}

fn short(e: &Expr) -> String {
    let s = pretty(e).split_whitespace().collect::<Vec<_>>().join(" ");
    if s.chars().count() > 72 {
        format!("{}...", s.chars().take(69).collect::<String>())
    } else {
        s
    }
}

fn rel_of_simple(t: &SimpleType) -> RelType {
    match t {
        SimpleType::Dist(inner) => RelType::Dist((**inner).clone()),
        other => RelType::Base(other.clone()),
    }
}

/// Range facts implied by a simple type.
fn type_facts(x: &str, t: &SimpleType) -> Vec<Assertion> {
    let mut out = Vec::new();
    for s in [Side::L, Side::R] {
        let v = Term::rel(x, s);
        match t {
            SimpleType::PosReal | SimpleType::ExtPosReal | SimpleType::Nat => out.push(Assertion::Le(Term::int(0), v)),
            SimpleType::UnitInterval => {
                out.push(Assertion::Le(Term::int(0), v.clone()));
                out.push(Assertion::Le(v, Term::int(1)));
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone)]
struct TopDef {
    name: String,
    params: Vec<Param>,
    body: Expr,
    rec: bool,
}

#[derive(Debug, Clone)]
struct FoldInfo {
    family: &'static str,
    extra: Vec<String>,
    kv: Option<Expr>,
}

#[derive(Debug, Clone, Default)]
struct Globals {
    defs: Vec<TopDef>,
    annotated: BTreeMap<String, RelType>,
    folds: BTreeMap<String, FoldInfo>,
    code: BTreeMap<String, (Vec<Param>, Expr)>,
}

#[derive(Debug, Clone)]
struct Ctx {
    env: RelEnv,
    hyps: Vec<Assertion>,
}

/// Synthesized monadic type; `f = None` holds for every index at `delta = 0`.
#[derive(Debug, Clone)]
struct MSyn {
    f: Option<FIdx>,
    delta: Term,
    inner: RelType,
}

impl MSyn {
    fn show(&self) -> String {
        match &self.f {
            Some(f) => format!("M[{}, {}]{}", f, self.delta, self.inner),
            None => format!("M[_, {}]{}", self.delta, self.inner),
        }
    }
}

const OUT: &str = "_out";

struct Checker {
    g: Globals,
    fresh: Cell<usize>,
}

impl Checker {
    fn new(g: Globals) -> Checker {
        Checker { g, fresh: Cell::new(0) }
    }

    fn gensym(&self, base: &str) -> String {
        let n = self.fresh.get() + 1;
        self.fresh.set(n);
        format!("{}_{}", base.trim_start_matches('_'), n)
    }

    fn initial(&self, env: &RelEnv) -> Ctx {
        let mut ctx = Ctx { env: RelEnv::new(), hyps: Vec::new() };
        for (n, t) in env.iter() {
            self.bind(&mut ctx, n, t.clone());
        }
        ctx
    }

    /// Binds `x` at `t` (its refinement variable renamed to `x`); an older `x` is renamed apart.
    fn bind(&self, ctx: &mut Ctx, x: &str, t: RelType) {
        let mentioned = ctx.env.get(x).is_some() || ctx.hyps.iter().any(|h| h.to_string().contains(&format!("{}.", x)));
        if mentioned {
            let old = self.gensym(x);
            ctx.hyps = ctx.hyps.iter().map(|h| h.rename(x, &old)).collect();
            let binds: Vec<(String, RelType)> =
                ctx.env.binds.iter().map(|(n, ty)| (if n == x { old.clone() } else { n.clone() }, ty.rename(x, &old))).collect();
            ctx.env.binds = binds;
        }
        let t = match &t {
            RelType::Refine { var, .. } if var != x => t.rename(var, x),
            _ => t,
        };
        if let RelType::Refine { phi, .. } = &t {
            ctx.hyps.push(phi.clone());
        }
        ctx.hyps.extend(type_facts(x, &t.erase()));
        ctx.env.insert(x, t);
    }

    fn simple_type(&self, ctx: &Ctx, e: &Expr) -> Option<SimpleType> {
        let mut wrapped = e.clone();
        for d in self.g.defs.iter().rev() {
            if ctx.env.get(&d.name).is_some() {
                continue;
            }
            wrapped = if d.rec {
                Expr::syn(ExprKind::LetRec { name: d.name.clone(), params: d.params.clone(), body: Box::new(d.body.clone()), rest: Box::new(wrapped) })
            } else {
                let lam = d.params.iter().rev().fold(d.body.clone(), |b, p| Expr::syn(ExprKind::Lam(p.clone(), Box::new(b))));
                Expr::syn(ExprKind::Let(Param::var(&d.name), Box::new(lam), Box::new(wrapped)))
            };
        }
        typecheck(&ctx.env.erasure(), &wrapped).ok()
    }

    fn terms(&self, ctx: &Ctx, e: &Expr) -> (Term, Term) {
        let sub = BTreeMap::new();
        (self.tr(ctx, e, Side::L, &sub, 0), self.tr(ctx, e, Side::R, &sub, 0))
    }

    fn same(&self, ctx: &Ctx, e: &Expr) -> bool {
        let (l, r) = self.terms(ctx, e);
        equal_terms(&ctx.hyps, &l, &r)
    }

    fn vc(&self, ctx: &Ctx, rule: &str, e: &Expr, goal: Assertion) -> Vc {
        Vc { rule: rule.into(), span: e.span.to_string(), hyps: ctx.hyps.clone(), goal }
    }

    fn node(&self, rule: &str, e: &Expr, judgement: String, premises: Vec<Derivation>, vcs: Vec<Vc>) -> Derivation {
        let vcs = vcs
            .into_iter()
            .map(|vc| {
                let outcome = discharge(&vc);
                VcResult { vc, outcome }
            })
            .collect();
        Derivation { rule: rule.into(), span: e.span.to_string(), judgement, vcs, premises }
    }

    // ---- translation of expressions to relational terms -------------------------------

    fn tr(&self, ctx: &Ctx, e: &Expr, side: Side, sub: &BTreeMap<String, Term>, depth: usize) -> Term {
        if depth > 64 {
            return Term::app("opaque", vec![Term::var(&e.span.to_string())]);
        }
        let t = |x: &Expr| self.tr(ctx, x, side, sub, depth + 1);
        match &e.kind {
            ExprKind::Var(x) => {
                if let Some(v) = sub.get(x) {
                    v.clone()
                } else if ctx.env.get(x).is_some() {
                    Term::rel(x, side)
                } else if let Some((ps, body)) = self.g.code.get(x).filter(|(ps, _)| ps.is_empty()) {
                    let _ = ps;
                    self.tr(ctx, body, side, &BTreeMap::new(), depth + 1)
                } else {
                    Term::var(x)
                }
            }
            ExprKind::Lit(Lit::Unit) => Term::Unit,
            ExprKind::Lit(Lit::Bool(b)) => Term::Bool(*b),
            ExprKind::Lit(Lit::Num(q)) => Term::Num(q.clone()),
            ExprKind::BinOp(op, a, b) => Term::app(op.symbol(), vec![t(a), t(b)]),
            ExprKind::UnOp(UnOp::Neg, a) => Term::app("neg", vec![t(a)]),
            ExprKind::UnOp(UnOp::Not, a) => Term::app("not", vec![t(a)]),
            ExprKind::Prim(p, args) => Term::app(p.name(), args.iter().map(t).collect()),
            ExprKind::Tuple(es) => Term::app("tuple", es.iter().map(t).collect()),
            ExprKind::Nil => Term::app("nil", vec![]),
            ExprKind::Cons(h, tl) => Term::app("cons", vec![t(h), t(tl)]),
            ExprKind::If(c, a, b) => Term::app("ite", vec![t(c), t(a), t(b)]),
            ExprKind::Return(a) => Term::app("return", vec![t(a)]),
            ExprKind::Infer(a) => Term::app("infer", vec![t(a)]),
            ExprKind::Ran(a) => Term::app("ran", vec![t(a)]),
            ExprKind::MLet(p, a, b) => {
                let (names, inner) = bind_plain(&p.pat, sub);
                Term::app("mlet", vec![t(a), Term::Lam(names, Box::new(self.tr(ctx, b, side, &inner, depth + 1)))])
            }
            ExprKind::Lam(p, b) => {
                let (names, inner) = bind_plain(&p.pat, sub);
                Term::Lam(names, Box::new(self.tr(ctx, b, side, &inner, depth + 1)))
            }
            ExprKind::Let(p, a, b) => {
                let mut inner = sub.clone();
                bind_pattern(&p.pat, t(a), &mut inner);
                self.tr(ctx, b, side, &inner, depth + 1)
            }
            ExprKind::Observe { binder, pred, prior } => {
                if let Some(shape) = recognize_likelihood(binder, pred) {
                    let d = t(shape.datum);
                    return match shape.family {
                        LikelihoodFamily::Bernoulli => Term::app("obs.bernoulli", vec![d, t(prior)]),
                        LikelihoodFamily::Normal { kv } => Term::app("obs.normal", vec![t(kv), d, t(prior)]),
                        LikelihoodFamily::Multinomial { .. } => Term::app("obs.multinomial", vec![d, t(prior)]),
                    };
                }
                let (names, inner) = bind_plain(&binder.pat, sub);
                Term::app("observe", vec![Term::Lam(names, Box::new(self.tr(ctx, pred, side, &inner, depth + 1))), t(prior)])
            }
            ExprKind::Match(s, arms) => {
                let pats: Vec<String> = arms.iter().map(|a| crate::syntax::pretty::pretty_pattern(&a.pat)).collect();
                let mut args = vec![t(s)];
                for a in arms {
                    let (names, inner) = bind_plain(&a.pat, sub);
                    args.push(Term::Lam(names, Box::new(self.tr(ctx, &a.body, side, &inner, depth + 1))));
                }
                Term::App(format!("match[{}]", pats.join("|")), args)
            }
            ExprKind::LetRec { name, params, body, rest } => {
                let mut inner = sub.clone();
                inner.insert(name.clone(), Term::var(name));
                let mut pnames = Vec::new();
                for p in params {
                    p.pat.binders(&mut pnames);
                }
                for n in &pnames {
                    inner.insert(n.clone(), Term::var(n));
                }
                let b = self.tr(ctx, body, side, &inner, depth + 1);
                let mut rinner = sub.clone();
                rinner.insert(name.clone(), Term::var(name));
                let r = self.tr(ctx, rest, side, &rinner, depth + 1);
                Term::App(format!("letrec:{}", name), vec![Term::Lam(pnames, Box::new(b)), r])
            }
            ExprKind::App(..) => self.tr_app(ctx, e, side, sub, depth),
        }
    }

    fn tr_app(&self, ctx: &Ctx, e: &Expr, side: Side, sub: &BTreeMap<String, Term>, depth: usize) -> Term {
        let (head, args) = e.spine();
        let targs: Vec<Term> = args.iter().map(|a| self.tr(ctx, a, side, sub, depth + 1)).collect();
        match &head.kind {
            ExprKind::Var(f) if !sub.contains_key(f) && ctx.env.get(f).is_none() => {
                if let Some(fold) = self.g.folds.get(f) {
                    let k = fold.extra.len();
                    if targs.len() == k + 2 {
                        let list = targs[k].clone();
                        let prior = targs[k + 1].clone();
                        let name = format!("fold.{}", fold.family);
                        return match &fold.kv {
                            Some(kv) => {
                                let ksub: BTreeMap<String, Term> = fold.extra.iter().cloned().zip(targs.iter().cloned()).collect();
                                let kt = self.tr(ctx, kv, side, &ksub, depth + 1);
                                Term::App(name, vec![kt, list, prior])
                            }
                            None => Term::App(name, vec![list, prior]),
                        };
                    }
                }
                if let Some((params, body)) = self.g.code.get(f) {
                    if !params.is_empty() && params.len() <= targs.len() {
                        let mut inner = BTreeMap::new();
                        for (p, a) in params.iter().zip(&targs) {
                            bind_pattern(&p.pat, a.clone(), &mut inner);
                        }
                        let v = self.tr(ctx, body, side, &inner, depth + 1);
                        return apply_rest(v, &targs[params.len()..]);
                    }
                }
                Term::App(format!("@{}", f), targs)
            }
            ExprKind::Lam(..) => {
                let (params, body) = peel_lams(head);
                if params.len() <= targs.len() {
                    let mut inner = sub.clone();
                    for (p, a) in params.iter().zip(&targs) {
                        bind_pattern(&p.pat, a.clone(), &mut inner);
                    }
                    let v = self.tr(ctx, body, side, &inner, depth + 1);
                    return apply_rest(v, &targs[params.len()..]);
                }
                let h = self.tr(ctx, head, side, sub, depth + 1);
                apply_rest(h, &targs)
            }
            _ => {
                let h = self.tr(ctx, head, side, sub, depth + 1);
                apply_rest(h, &targs)
            }
        }
    }

    // ---- checking -----------------------------------------------------------------------

    fn check_def(&self, ctx: &Ctx, name: &str, params: &[Param], body: &Expr, t: &RelType) -> R<Derivation> {
        let mut ctx = ctx.clone();
        let mut t = t.clone();
        for p in params {
            let x = p.name().ok_or_else(|| err("Def", body, "pattern parameters need a relational binder name"))?;
            let RelType::Pi { var, dom, cod } = t else {
                return Err(err("Def", body, format!("{} takes more parameters than its annotation", name)));
            };
            let dom = dom.rename(&var, x);
            self.bind(&mut ctx, x, dom);
            t = cod.rename(&var, x);
        }
        let d = self.check(&ctx, body, &t)?;
        Ok(self.node("Def", body, format!("{} : {}", name, t), vec![d], vec![]))
    }

    fn check(&self, ctx: &Ctx, e: &Expr, t: &RelType) -> R<Derivation> {
        match &e.kind {
            ExprKind::Let(p, a, b) => {
                let ctx2 = self.bind_let(ctx, p, a, e)?;
                let d = self.check(&ctx2, b, t)?;
                Ok(self.node("Let", e, format!("{} : {}", short(e), t), vec![d], vec![]))
            }
            ExprKind::Match(s, arms) => self.check_match(ctx, e, s, arms, t),
            ExprKind::If(c, a, b) => {
                if !self.same(ctx, c) {
                    return Err(err("If", e, format!("condition {} may differ between the two runs", short(c))));
                }
                let (cl, _) = self.terms(ctx, c);
                let mut prem = Vec::new();
                for (branch, val) in [(a, true), (b, false)] {
                    let mut c2 = ctx.clone();
                    c2.hyps.push(Assertion::Eq(cl.clone(), Term::Bool(val)));
                    prem.push(self.check(&c2, branch, t)?);
                }
                Ok(self.node("If", e, format!("{} : {}", short(e), t), prem, vec![]))
            }
            ExprKind::LetRec { rest, .. } => {
                let d = self.check(ctx, rest, t)?;
                Ok(self.node("LetRec", e, format!("{} : {}", short(e), t), vec![d], vec![]))
            }
            _ => match t {
                RelType::Monad { f, delta, inner } => self.check_m(ctx, e, f, delta, inner, t),
                RelType::Pi { var, dom, cod } => match &e.kind {
                    ExprKind::Lam(p, b) => {
                        let x = p.name().ok_or_else(|| err("Lam", e, "pattern binders need a name"))?;
                        let mut c2 = ctx.clone();
                        self.bind(&mut c2, x, dom.rename(var, x));
                        let cod = cod.rename(var, x);
                        let d = self.check(&c2, b, &cod)?;
                        Ok(self.node("Lam", e, format!("{} : {}", short(e), t), vec![d], vec![]))
                    }
                    _ => {
                        let (st, d) = self.synth_v(ctx, e)?;
                        let vcs = self.sub(ctx, &st, t, "Sub", &e.span.to_string())?;
                        Ok(self.node("Sub", e, format!("{} : {}", short(e), t), vec![d], vcs))
                    }
                },
                _ => self.check_v(ctx, e, t),
            },
        }
    }

    fn bind_let(&self, ctx: &Ctx, p: &Param, a: &Expr, at: &Expr) -> R<Ctx> {
        let ty = self.simple_type(ctx, a).ok_or_else(|| err("Let", at, format!("cannot determine the simple type of {}", short(a))))?;
        let (l, r) = self.terms(ctx, a);
        let mut c2 = ctx.clone();
        let mut binds = Vec::new();
        pattern_parts(&p.pat, &ty, l, r, &mut binds).ok_or_else(|| err("Let", at, "pattern does not match the bound value"))?;
        for (x, t, l, r) in binds {
            self.bind(&mut c2, &x, rel_of_simple(&t));
            c2.hyps.push(Assertion::Eq(Term::rel(&x, Side::L), l));
            c2.hyps.push(Assertion::Eq(Term::rel(&x, Side::R), r));
        }
        Ok(c2)
    }

    fn check_match(&self, ctx: &Ctx, e: &Expr, s: &Expr, arms: &[crate::syntax::Arm], t: &RelType) -> R<Derivation> {
        let sty = self.simple_type(ctx, s).ok_or_else(|| err("Match", e, "cannot type the scrutinee"))?;
        let (sl, sr) = self.terms(ctx, s);
        let judgement = format!("{} : {}", short(e), t);
        if equal_terms(&ctx.hyps, &sl, &sr) {
            let mut prem = Vec::new();
            for a in arms {
                let mut c2 = ctx.clone();
                let mut names = Vec::new();
                a.pat.binders(&mut names);
                let mut parts = Vec::new();
                let pl = self.pattern_term(&a.pat, Side::L);
                let pr = self.pattern_term(&a.pat, Side::R);
                pattern_parts(&a.pat, &sty, pl.clone(), pr.clone(), &mut parts).ok_or_else(|| err("Match", e, "ill-typed pattern"))?;
                for (x, ty, _, _) in &parts {
                    if names.contains(x) {
                        self.bind(&mut c2, x, RelType::refine(x, rel_of_simple(ty), Assertion::diag(x)));
                    }
                }
                c2.hyps.push(Assertion::Eq(sl.clone(), pl));
                c2.hyps.push(Assertion::Eq(sr.clone(), pr));
                prem.push(self.check(&c2, &a.body, t)?);
            }
            return Ok(self.node("Match", e, judgement, prem, vec![]));
        }
        let adjacent = prove(&ctx.hyps, &Assertion::Phi(sl.clone(), sr.clone())).is_ok();
        let SimpleType::List(elem) = &sty else {
            return Err(err("Match", e, "scrutinee is neither synchronized nor adjacent"));
        };
        if !adjacent {
            return Err(err("Match", e, "scrutinee is neither synchronized nor adjacent"));
        }
        let (nil_arm, cons_arm) = match (&arms.first().map(|a| &a.pat), &arms.get(1).map(|a| &a.pat)) {
            (Some(Pattern::Nil), Some(Pattern::Cons(..))) if arms.len() == 2 => (&arms[0], &arms[1]),
            (Some(Pattern::Cons(..)), Some(Pattern::Nil)) if arms.len() == 2 => (&arms[1], &arms[0]),
            _ => return Err(err("Match-Phi", e, "adjacent lists are matched with exactly a [] arm and a cons arm")),
        };
        let Pattern::Cons(hp, tp) = &cons_arm.pat else { unreachable!() };
        let (Some(h), Some(tl)) = (hp.as_var(), tp.as_var()) else {
            return Err(err("Match-Phi", e, "cons arm must bind variables"));
        };
        let head_rel = match elem.as_ref() {
            SimpleType::Bool | SimpleType::Enum(_) => Assertion::True,
            t if t.is_numeric() => Assertion::abs_diff_le(Term::rel(h, Side::L), Term::rel(h, Side::R), Term::int(1)),
            other => return Err(err("Match-Phi", e, format!("no adjacency for lists of {}", other))),
        };
        let mut prem = Vec::new();
        let mut nil_ctx = ctx.clone();
        nil_ctx.hyps.push(Assertion::Eq(sl.clone(), Term::app("nil", vec![])));
        nil_ctx.hyps.push(Assertion::Eq(sr.clone(), Term::app("nil", vec![])));
        prem.push(self.check(&nil_ctx, &nil_arm.body, t)?);
        let cases = [
            (head_rel, RelType::refine(tl, RelType::Base(sty.clone()), Assertion::diag(tl))),
            (Assertion::diag(h), RelType::refine(tl, RelType::Base(sty.clone()), Assertion::Phi(Term::rel(tl, Side::L), Term::rel(tl, Side::R)))),
        ];
        for (hrel, tty) in cases {
            let mut c2 = ctx.clone();
            self.bind(&mut c2, h, RelType::refine(h, RelType::Base((**elem).clone()), hrel));
            self.bind(&mut c2, tl, tty);
            let cons = |s: Side| Term::app("cons", vec![Term::rel(h, s), Term::rel(tl, s)]);
            c2.hyps.push(Assertion::Eq(sl.clone(), cons(Side::L)));
            c2.hyps.push(Assertion::Eq(sr.clone(), cons(Side::R)));
            prem.push(self.check(&c2, &cons_arm.body, t)?);
        }
        Ok(self.node("Match-Phi", e, judgement, prem, vec![]))
    }

    fn pattern_term(&self, p: &Pattern, side: Side) -> Term {
        match p {
            Pattern::Wild => Term::rel(&self.gensym("w"), side),
            Pattern::Var(x) => Term::rel(x, side),
            Pattern::Lit(Lit::Unit) => Term::Unit,
            Pattern::Lit(Lit::Bool(b)) => Term::Bool(*b),
            Pattern::Lit(Lit::Num(q)) => Term::Num(q.clone()),
            Pattern::Nil => Term::app("nil", vec![]),
            Pattern::Cons(h, t) => Term::app("cons", vec![self.pattern_term(h, side), self.pattern_term(t, side)]),
            Pattern::Tuple(ps) => Term::app("tuple", ps.iter().map(|q| self.pattern_term(q, side)).collect()),
        }
    }

    fn check_m(&self, ctx: &Ctx, e: &Expr, f: &FIdx, delta: &Term, inner: &RelType, t: &RelType) -> R<Derivation> {
        let judgement = format!("{} : {}", short(e), t);
        if canonical(&ctx.hyps, delta) == Term::Inf {
            return Ok(self.node("Top", e, judgement, vec![], vec![self.vc(ctx, "Top", e, Assertion::InF(f.clone()))]));
        }
        let side = |c: &Checker, rule: &str| vec![c.vc(ctx, rule, e, Assertion::InF(f.clone())), c.vc(ctx, rule, e, Assertion::Le(Term::int(0), delta.clone()))];
        match &e.kind {
            ExprKind::Return(v) => {
                let d = self.check(ctx, v, inner)?;
                return Ok(self.node("UnitM", e, judgement, vec![d], side(self, "UnitM")));
            }
            ExprKind::MLet(p, a, b) => {
                let x = p.name().ok_or_else(|| err("BindM", e, "mlet binds a single variable"))?;
                let (h, dh) = self.synth_m(ctx, a)?;
                let f2 = residual(f, h.f.as_ref()).ok_or_else(|| {
                    err("BindM", e, format!("non-composable index pair ({}, {})", h.f.as_ref().map(|k| k.to_string()).unwrap_or_default(), f))
                })?;
                let d2 = sub_delta(delta, &h.delta);
                let mut c2 = ctx.clone();
                self.bind(&mut c2, x, h.inner.clone());
                let body_t = RelType::monad(f2, d2, inner.clone());
                let db = self.check(&c2, b, &body_t)?;
                return Ok(self.node("BindM", e, judgement, vec![dh, db], vec![]));
            }
            _ => {}
        }
        if self.same(ctx, e) {
            let w = self.gensym("v");
            let mut vcs = side(self, "Refl");
            if let Some((var, phi)) = inner.refinement() {
                vcs.push(self.vc(ctx, "Refl", e, phi.instantiate(var, &Term::var(&w), &Term::var(&w))));
            }
            return Ok(self.node("Refl", e, judgement, vec![], vcs));
        }
        let delta_rule = match &e.kind {
            ExprKind::Observe { .. } => Some("Observe"),
            ExprKind::Ran(_) => Some("Ran"),
            ExprKind::App(..) => match &e.spine().0.kind {
                ExprKind::Var(g) if self.g.folds.contains_key(g) && ctx.env.get(g).is_none() => Some("Fold"),
                _ => None,
            },
            _ => None,
        };
        if let Some(rule) = delta_rule {
            if let Some((var, phi)) = inner.refinement() {
                if !phi.is_diag_of(var) {
                    return Err(err(rule, e, "only diagonal refinements are supported under this rule"));
                }
            }
            let target = match &e.kind {
                ExprKind::Ran(d) => d,
                _ => e,
            };
            let (l, r) = self.terms(ctx, target);
            let mut vcs = side(self, rule);
            vcs.push(self.vc(ctx, rule, e, Assertion::Delta { f: f.clone(), l, r, bound: delta.clone() }));
            return Ok(self.node(rule, e, judgement, vec![], vcs));
        }
        let (s, d) = self.synth_m(ctx, e)?;
        let vcs = self.sub_m(ctx, &s, f, delta, inner, &e.span.to_string())?;
        Ok(self.node("Sub", e, judgement, vec![d], vcs))
    }

    fn check_v(&self, ctx: &Ctx, e: &Expr, t: &RelType) -> R<Derivation> {
        let judgement = format!("{} : {}", short(e), t);
        match t {
            RelType::Base(_) | RelType::Dist(_) => Ok(self.node("Val", e, judgement, vec![], vec![])),
            RelType::Refine { var, base, phi } => {
                if let (ExprKind::Infer(m), RelType::Dist(tau)) = (&e.kind, base.as_ref()) {
                    let idx = match phi {
                        Assertion::Delta { f, l: Term::Rel(a, Side::L), r: Term::Rel(b, Side::R), bound } if a == var && b == var => {
                            Some((f.clone(), bound.clone()))
                        }
                        _ => None,
                    };
                    if let Some((f, bound)) = idx {
                        if !self.same(ctx, e) {
                            let w = self.gensym("x");
                            let mt = RelType::monad(f, bound, RelType::diag(&w, tau.clone()));
                            let d = self.check(ctx, m, &mt)?;
                            return Ok(self.node("Infer", e, judgement, vec![d], vec![]));
                        }
                    }
                }
                let (l, r) = self.terms(ctx, e);
                let goal = phi.instantiate(var, &l, &r);
                Ok(self.node("Val", e, judgement, vec![], vec![self.vc(ctx, "Val", e, goal)]))
            }
            _ => Err(err("Val", e, format!("expected a value of type {}", t))),
        }
    }

    // ---- synthesis ----------------------------------------------------------------------

    fn monad_inner(&self, ctx: &Ctx, e: &Expr) -> R<SimpleType> {
        match self.simple_type(ctx, e) {
            Some(SimpleType::Monad(t)) => Ok(*t),
            Some(other) => Err(err("Synth", e, format!("expected a monadic computation, found {}", other))),
            None => Err(err("Synth", e, "cannot determine the simple type")),
        }
    }

    fn synth_m(&self, ctx: &Ctx, e: &Expr) -> R<(MSyn, Derivation)> {
        match &e.kind {
            ExprKind::Return(v) => {
                let (vt, d) = self.synth_v(ctx, v)?;
                let s = MSyn { f: None, delta: Term::int(0), inner: vt };
                let j = format!("{} : {}", short(e), s.show());
                return Ok((s, self.node("UnitM", e, j, vec![d], vec![])));
            }
            ExprKind::MLet(p, a, b) => {
                let x = p.name().ok_or_else(|| err("BindM", e, "mlet binds a single variable"))?;
                let (h, dh) = self.synth_m(ctx, a)?;
                let mut c2 = ctx.clone();
                self.bind(&mut c2, x, h.inner.clone());
                let (bs, db) = self.synth_m(&c2, b)?;
                let f = match (&h.f, &bs.f) {
                    (None, g) | (g, None) => g.clone(),
                    (Some(f1), Some(f2)) => Some(super::term::compose_idx(f1, f2).ok_or_else(|| err("BindM", e, format!("non-composable index pair ({}, {})", f1, f2)))?),
                };
                let s = MSyn { f, delta: add_delta(&h.delta, &bs.delta), inner: bs.inner };
                let j = format!("{} : {}", short(e), s.show());
                return Ok((s, self.node("BindM", e, j, vec![dh, db], vec![])));
            }
            _ => {}
        }
        if self.same(ctx, e) {
            let tau = self.monad_inner(ctx, e)?;
            let w = self.gensym("v");
            let s = MSyn { f: None, delta: Term::int(0), inner: RelType::diag(&w, tau) };
            let j = format!("{} : {}", short(e), s.show());
            return Ok((s, self.node("Refl", e, j, vec![], vec![])));
        }
        match &e.kind {
            ExprKind::Prim(Prim::LapMech, args) => {
                let eps = self.equal_param(ctx, e, &args[0], "Lap")?;
                let (k, vc) = self.sens(ctx, e, &args[1], "Lap")?;
                let w = self.gensym("v");
                let s = MSyn { f: Some(FIdx::EpsD(k.mul(&Poly::of_term(&eps)))), delta: Term::int(0), inner: RelType::diag(&w, SimpleType::Real) };
                let j = format!("{} : {}", short(e), s.show());
                Ok((s, self.node("Lap", e, j, vec![], vec![vc])))
            }
            ExprKind::Prim(Prim::GaussMech, args) => {
                let sigma = self.equal_param(ctx, e, &args[0], "Gauss")?;
                let Term::App(g, ga) = &sigma else {
                    return Err(err("Gauss", e, "noise scale must be gaussSigma(eps, delta)"));
                };
                if g != "gaussSigma" || ga.len() != 2 {
                    return Err(err("Gauss", e, "noise scale must be gaussSigma(eps, delta)"));
                }
                let (k, vc) = self.sens(ctx, e, &args[1], "Gauss")?;
                let ke = k.mul(&Poly::of_term(&ga[0]));
                let small = self.vc(ctx, "Gauss", e, Assertion::Lt(ke.to_term(), Term::int(1)));
                let w = self.gensym("v");
                let s = MSyn { f: Some(FIdx::EpsD(ke)), delta: ga[1].clone(), inner: RelType::diag(&w, SimpleType::Real) };
                let j = format!("{} : {}", short(e), s.show());
                Ok((s, self.node("Gauss", e, j, vec![], vec![vc, small])))
            }
            ExprKind::Prim(Prim::ExpMech, args) => {
                let eps = self.equal_param(ctx, e, &args[0], "Exp")?;
                if let Some(outs) = args.get(3) {
                    self.equal_param(ctx, e, outs, "Exp")?;
                }
                let scored = Expr::apps(args[1].clone(), [args[2].clone(), Expr::var(OUT)]);
                let (k, vc) = self.sens(ctx, e, &scored, "Exp")?;
                let tau = self.monad_inner(ctx, e)?;
                let w = self.gensym("v");
                let s = MSyn { f: Some(FIdx::EpsD(k.mul(&Poly::of_term(&eps)))), delta: Term::int(0), inner: RelType::diag(&w, tau) };
                let j = format!("{} : {}", short(e), s.show());
                Ok((s, self.node("Exp", e, j, vec![], vec![vc])))
            }
            ExprKind::Var(x) => match ctx.env.get(x) {
                Some(RelType::Monad { f, delta, inner }) => {
                    let s = MSyn { f: Some(f.clone()), delta: delta.clone(), inner: (**inner).clone() };
                    let j = format!("{} : {}", x, s.show());
                    Ok((s, self.node("Var", e, j, vec![], vec![])))
                }
                _ => Err(err("Var", e, format!("{} has no monadic relational type", x))),
            },
            ExprKind::App(..) => {
                let (t, d) = self.synth_app(ctx, e)?;
                match t {
                    RelType::Monad { f, delta, inner } => Ok((MSyn { f: Some(f), delta, inner: *inner }, d)),
                    other => Err(err("App", e, format!("expected a monadic result, found {}", other))),
                }
            }
            _ => Err(err("Synth", e, format!("no relational type can be synthesized for {}; add an annotation", short(e)))),
        }
    }

    fn synth_app(&self, ctx: &Ctx, e: &Expr) -> R<(RelType, Derivation)> {
        let (head, args) = e.spine();
        let ExprKind::Var(fname) = &head.kind else {
            return Err(err("App", e, "application of an unannotated function"));
        };
        let fty = ctx
            .env
            .get(fname)
            .filter(|t| matches!(t, RelType::Pi { .. }))
            .or_else(|| self.g.annotated.get(fname))
            .ok_or_else(|| err("App", e, format!("{} has no relational annotation", fname)))?
            .clone();
        let mut t = fty;
        let mut prem = Vec::new();
        for a in args {
            let RelType::Pi { var, dom, cod } = t else {
                return Err(err("App", e, format!("{} is applied to too many arguments", fname)));
            };
            prem.push(self.check(ctx, a, &dom)?);
            let (l, r) = self.terms(ctx, a);
            t = cod.instantiate(&var, &l, &r);
        }
        let j = format!("{} : {}", short(e), t);
        let d = self.node("App", e, j, prem, vec![]);
        Ok((t, d))
    }

    fn synth_v(&self, ctx: &Ctx, e: &Expr) -> R<(RelType, Derivation)> {
        if let ExprKind::Var(x) = &e.kind {
            if let Some(t) = ctx.env.get(x) {
                let j = format!("{} : {}", x, t);
                return Ok((t.clone(), self.node("Var", e, j, vec![], vec![])));
            }
        }
        if let ExprKind::Infer(m) = &e.kind {
            if !self.same(ctx, e) {
                let (s, d) = self.synth_m(ctx, m)?;
                let tau = self.monad_inner(ctx, m)?;
                let w = self.gensym("d");
                let phi = match s.f {
                    Some(f) => Assertion::Delta { f, l: Term::rel(&w, Side::L), r: Term::rel(&w, Side::R), bound: s.delta },
                    None => Assertion::diag(&w),
                };
                let t = RelType::refine(&w, RelType::Dist(tau), phi);
                let j = format!("{} : {}", short(e), t);
                return Ok((t, self.node("Infer", e, j, vec![d], vec![])));
            }
        }
        if matches!(e.kind, ExprKind::App(..)) && !self.same(ctx, e) {
            if let Ok(r) = self.synth_app(ctx, e) {
                return Ok(r);
            }
        }
        let tau = self.simple_type(ctx, e).ok_or_else(|| err("Val", e, "cannot determine the simple type"))?;
        let w = self.gensym("v");
        let t = if self.same(ctx, e) {
            let (l, _) = self.terms(ctx, e);
            let mut phi = Assertion::diag(&w);
            if let RelType::Dist(_) = rel_of_simple(&tau) {
            } else {
                phi = Assertion::and(vec![phi, Assertion::Eq(Term::rel(&w, Side::L), l)]);
            }
            RelType::refine(&w, rel_of_simple(&tau), phi)
        } else {
            rel_of_simple(&tau)
        };
        let j = format!("{} : {}", short(e), t);
        let rule = if self.same(ctx, e) { "Refl" } else { "Val" };
        Ok((t, self.node(rule, e, j, vec![], vec![])))
    }

    fn equal_param(&self, ctx: &Ctx, e: &Expr, a: &Expr, rule: &str) -> R<Term> {
        let (l, r) = self.terms(ctx, a);
        if !equal_terms(&ctx.hyps, &l, &r) {
            return Err(err(rule, e, format!("mechanism parameter {} may differ between the two runs", short(a))));
        }
        Ok(canonical(&ctx.hyps, &l))
    }

    fn sens(&self, ctx: &Ctx, e: &Expr, a: &Expr, rule: &str) -> R<(Poly, Vc)> {
        let (l, r) = self.terms(ctx, a);
        let (k, _) = sensitivity(&ctx.hyps, &l, &r).ok_or_else(|| err(rule, e, format!("no sensitivity bound for {}", short(a))))?;
        let k = Poly::of_term(&canonical(&ctx.hyps, &k.to_term()));
        let vc = self.vc(ctx, rule, e, Assertion::abs_diff_le(l, r, k.to_term()));
        Ok((k, vc))
    }

    // ---- subtyping ----------------------------------------------------------------------

    fn sub_m(&self, ctx: &Ctx, s: &MSyn, f: &FIdx, delta: &Term, inner: &RelType, span: &str) -> R<Vec<Vc>> {
        let mut vcs = Vec::new();
        let mk = |goal: Assertion| Vc { rule: "Sub".into(), span: span.into(), hyps: ctx.hyps.clone(), goal };
        match (&s.f, f) {
            (None, _) => {}
            (Some(FIdx::EpsD(a)), FIdx::EpsD(b)) => vcs.push(mk(Assertion::Le(a.to_term(), b.to_term()))),
            (Some(g), f) if g == f => {}
            (Some(g), f) => {
                return Err(RelError { rule: "Sub".into(), span: span.into(), msg: format!("index {} is not below {}", g, f) });
            }
        }
        vcs.push(mk(Assertion::InF(f.clone())));
        vcs.push(mk(Assertion::Le(s.delta.clone(), delta.clone())));
        vcs.extend(self.sub(ctx, &s.inner, inner, "Sub", span)?);
        Ok(vcs)
    }

    fn sub(&self, ctx: &Ctx, t: &RelType, u: &RelType, rule: &str, span: &str) -> R<Vec<Vc>> {
        let mismatch = || RelError { rule: rule.into(), span: span.into(), msg: format!("{} is not a subtype of {}", t, u) };
        let mk = |hyps: Vec<Assertion>, goal: Assertion| Vc { rule: rule.into(), span: span.into(), hyps, goal };
        match (t, u) {
            (RelType::Monad { f: f1, delta: d1, inner: i1 }, RelType::Monad { f: f2, delta: d2, inner: i2 }) => {
                let s = MSyn { f: Some(f1.clone()), delta: d1.clone(), inner: (**i1).clone() };
                let mut vcs = Vec::new();
                match (f1, f2) {
                    (FIdx::EpsD(a), FIdx::EpsD(b)) => vcs.push(mk(ctx.hyps.clone(), Assertion::Le(a.to_term(), b.to_term()))),
                    _ if f1 == f2 => {}
                    _ => return Err(mismatch()),
                }
                let _ = s;
                vcs.push(mk(ctx.hyps.clone(), Assertion::Le(d1.clone(), d2.clone())));
                vcs.extend(self.sub(ctx, i1, i2, rule, span)?);
                Ok(vcs)
            }
            (RelType::Pi { var: v1, dom: a1, cod: c1 }, RelType::Pi { var: v2, dom: a2, cod: c2 }) => {
                let w = self.gensym(v1);
                let mut vcs = self.sub(ctx, &a2.rename(v2, &w), &a1.rename(v1, &w), rule, span)?;
                let mut c2ctx = ctx.clone();
                self.bind(&mut c2ctx, &w, a2.rename(v2, &w));
                vcs.extend(self.sub(&c2ctx, &c1.rename(v1, &w), &c2.rename(v2, &w), rule, span)?);
                Ok(vcs)
            }
            (RelType::Refine { var, base, phi }, _) => {
                let w = self.gensym(var);
                let mut c2 = ctx.clone();
                c2.hyps.push(phi.rename(var, &w));
                c2.hyps.extend(type_facts(&w, &base.erase()));
                match u {
                    RelType::Refine { var: v2, base: b2, phi: p2 } => {
                        let mut vcs = self.sub(&c2, base, b2, rule, span)?;
                        vcs.push(mk(c2.hyps.clone(), p2.rename(v2, &w)));
                        Ok(vcs)
                    }
                    _ => self.sub(&c2, base, u, rule, span),
                }
            }
            (_, RelType::Refine { var, base, phi }) => {
                let w = self.gensym(var);
                let mut vcs = self.sub(ctx, t, base, rule, span)?;
                let mut hyps = ctx.hyps.clone();
                hyps.extend(type_facts(&w, &base.erase()));
                vcs.push(mk(hyps, phi.rename(var, &w)));
                Ok(vcs)
            }
            (RelType::Base(a), RelType::Base(b)) if a.is_subtype(b) => Ok(vec![]),
            (RelType::Dist(a), RelType::Dist(b)) if a.is_subtype(b) => Ok(vec![]),
            _ => Err(mismatch()),
        }
    }
}

/// Index left for the continuation of a bind whose head has index `head`.
fn residual(target: &FIdx, head: Option<&FIdx>) -> Option<FIdx> {
    match (target, head) {
        (t, None) => Some(t.clone()),
        (FIdx::EpsD(e), Some(FIdx::EpsD(e1))) => Some(FIdx::EpsD(e.sub(e1))),
        (t, Some(h)) if t.same_kind(h) && !matches!(t, FIdx::EpsD(_)) => Some(t.clone()),
        _ => None,
    }
}

fn sub_delta(d: &Term, d1: &Term) -> Term {
    Poly::of_term(d).sub(&Poly::of_term(d1)).to_term()
}

fn add_delta(a: &Term, b: &Term) -> Term {
    Poly::of_term(a).add(&Poly::of_term(b)).to_term()
}

fn apply_rest(f: Term, rest: &[Term]) -> Term {
    if rest.is_empty() {
        return f;
    }
    let mut args = vec![f];
    args.extend(rest.iter().cloned());
    Term::app("apply", args)
}

/// Lambda-bound names stand for themselves on both sides.
fn bind_plain(p: &Pattern, sub: &BTreeMap<String, Term>) -> (Vec<String>, BTreeMap<String, Term>) {
    let mut names = Vec::new();
    p.binders(&mut names);
    let mut inner = sub.clone();
    for n in &names {
        inner.insert(n.clone(), Term::var(n));
    }
    (names, inner)
}

fn proj(t: &Term, i: usize) -> Term {
    match t {
        Term::App(f, xs) if f == "tuple" && i < xs.len() => xs[i].clone(),
        _ => Term::App(format!("proj{}", i), vec![t.clone()]),
    }
}

fn bind_pattern(p: &Pattern, t: Term, sub: &mut BTreeMap<String, Term>) {
    match p {
        Pattern::Var(x) => {
            sub.insert(x.clone(), t);
        }
        Pattern::Tuple(ps) => {
            for (i, q) in ps.iter().enumerate() {
                bind_pattern(q, proj(&t, i), sub);
            }
        }
        Pattern::Cons(h, tl) => {
            bind_pattern(h, Term::app("head", vec![t.clone()]), sub);
            bind_pattern(tl, Term::app("tail", vec![t]), sub);
        }
        Pattern::Wild | Pattern::Lit(_) | Pattern::Nil => {}
    }
}

/// Variables bound by `p` against a value of type `ty` with side terms `l`, `r`.
fn pattern_parts(p: &Pattern, ty: &SimpleType, l: Term, r: Term, out: &mut Vec<(String, SimpleType, Term, Term)>) -> Option<()> {
    match (p, ty) {
        (Pattern::Var(x), _) => out.push((x.clone(), ty.clone(), l, r)),
        (Pattern::Tuple(ps), SimpleType::Tuple(ts)) if ps.len() == ts.len() => {
            for (i, (q, t)) in ps.iter().zip(ts).enumerate() {
                pattern_parts(q, t, proj(&l, i), proj(&r, i), out)?;
            }
        }
        (Pattern::Cons(h, t), SimpleType::List(e)) => {
            let hd = |x: &Term| match x {
                Term::App(f, a) if f == "cons" => a[0].clone(),
                _ => Term::app("head", vec![x.clone()]),
            };
            let tl = |x: &Term| match x {
                Term::App(f, a) if f == "cons" => a[1].clone(),
                _ => Term::app("tail", vec![x.clone()]),
            };
            pattern_parts(h, e, hd(&l), hd(&r), out)?;
            pattern_parts(t, ty, tl(&l), tl(&r), out)?;
        }
        (Pattern::Wild | Pattern::Lit(_) | Pattern::Nil, _) => {}
        _ => return None,
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reltype::parse::{parse_reltype, parse_rt};
    use crate::syntax::parse;

    fn ty(s: &str) -> RelType {
        parse_reltype(s).unwrap()
    }

    #[test]
    fn unit_accepts_any_index() {
        let env = RelEnv::new().with("x", ty("{x :: real | =}"));
        let d = relcheck(&env, &parse("return x").unwrap(), &ty("M[HD, 0.7]{y :: real | =}")).unwrap();
        assert_eq!(d.rule, "UnitM");
        assert!(d.accepted(), "{:#?}", d.unproved());
    }

    #[test]
    fn bind_adds_epsilons() {
        let env = RelEnv::new().with("x", ty("{x :: real | |x.L - x.R| <= 1}")).with("e1", ty("{e1 :: pos | =}")).with("e2", ty("{e2 :: pos | =}"));
        let e = parse("mlet a = lapMech(e1, x) in mlet b = lapMech(e2, x) in return (a + b)").unwrap();
        let ok = relcheck(&env, &e, &ty("M[epsD(e1 + e2), 0]{v :: real | =}")).unwrap();
        assert!(ok.accepted(), "{:#?}", ok.unproved());
        let short = relcheck(&env, &e, &ty("M[epsD(e1), 0]{v :: real | =}")).unwrap();
        assert!(!short.accepted());
    }

    #[test]
    fn sd_then_kl_is_not_composable() {
        let env = RelEnv::new().with("m1", ty("M[SD, 0.1]{a :: bool | =}")).with("m2", ty("M[KL, 0.1]{b :: bool | =}"));
        let e = parse("mlet a = m1 in m2").unwrap();
        let r = relcheck(&env, &e, &ty("M[KL, 0.2]{c :: bool | =}"));
        assert!(r.unwrap_err().msg.contains("non-composable"));
    }

    fn all_proved(vcs: &[Vc]) -> bool {
        vcs.iter().all(|v| discharge(v).is_proved())
    }

    #[test]
    fn monadic_subtyping_widens_delta() {
        let env = RelEnv::new();
        assert!(all_proved(&subtype(&env, &ty("M[SD, 0] bool"), &ty("M[SD, 0.1] bool")).unwrap()));
        assert!(!all_proved(&subtype(&env, &ty("M[SD, 0.1] bool"), &ty("M[SD, 0] bool")).unwrap()));
        assert!(all_proved(&subtype(&env, &ty("{x :: [0,1] | =}"), &ty("[0,1]")).unwrap()));
        assert!(subtype(&env, &ty("M[SD, 0] bool"), &ty("M[HD, 0] bool")).is_err());
    }

    #[test]
    fn recursive_randomized_response() {
        let prog = parse(
            "let score x y = if x = y then 1 else 0
             let rec addNoise db eps = match db with
               | [] -> return []
               | y :: yl -> mlet yn = expMech(eps, score, y) in mlet yln = addNoise yl eps in return (yn :: yln)
             let main db eps = addNoise db eps",
        )
        .unwrap();
        let rt = parse_rt(
            "addNoise :: {l :: list bool | Phi} -> {eps :: pos | =} -> M[epsD(eps), 0]{b :: list bool | =}
             main :: {l :: list bool | Phi} -> {eps :: pos | =} -> M[epsD(eps), 0]{b :: list bool | =}",
        )
        .unwrap();
        let d = relcheck_program(&prog, &rt).unwrap();
        assert!(d.accepted(), "{:#?}", d.unproved());
        assert!(replay(&d).unwrap() > 0);
        let json = serde_json::to_string(&d).unwrap();
        let back: Derivation = serde_json::from_str(&json).unwrap();
        assert_eq!(replay_program(&prog, &rt, &back).unwrap(), replay(&d).unwrap());
    }
}
