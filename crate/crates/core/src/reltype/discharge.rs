//! Verification conditions and their discharge.
//!
//! Equalities are closed under congruence by canonicalizing terms (variable classes plus
//! definitions); inequalities use polynomial and interval reasoning; divergence and
//! sensitivity atoms are matched against the lemma library.

use std::collections::BTreeMap;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use super::assertion::Assertion;
use super::term::{named_constant, q_to_f64, FIdx, Poly, Side, Term};

/// A proof obligation together with the hypotheses in scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vc {
    /// Typing rule that produced the obligation.
    pub rule: String,
    pub span: String,
    pub hyps: Vec<Assertion>,
    pub goal: Assertion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Proved { steps: Vec<String> },
    Unproved { residual: String },
}

impl Outcome {
    pub fn is_proved(&self) -> bool {
        matches!(self, Outcome::Proved { .. })
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Proved { steps } => write!(f, "proved ({})", steps.join("; ")),
            Outcome::Unproved { residual } => write!(f, "unproved: {}", residual),
        }
    }
}

/// How a library entry is re-validated numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    HdBeta,
    SdBeta,
    HdDirichlet,
    DataProcessing,
    L1BetaCount,
    NormalMeanSensitivity,
    ScoreSensitivity1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Lemma {
    pub name: &'static str,
    pub statement: &'static str,
    pub certificate: Certificate,
}

pub const LEMMAS: &[Lemma] = &[
    Lemma {
        name: "hd-beta",
        statement: "Beta(a,b) prior with a,b >= 1, one bernoulli observation flipped: Hellinger distance of the posteriors <= rho = sqrt(1 - pi/4), table-form HD <= rho^2",
        certificate: Certificate::HdBeta,
    },
    Lemma {
        name: "sd-beta",
        statement: "Beta(a,b) prior with a,b >= 1, one bernoulli observation flipped: SD of the posteriors <= zeta = sqrt(2 (1 - pi/4))",
        certificate: Certificate::SdBeta,
    },
    Lemma {
        name: "hd-dirichlet",
        statement: "Dirichlet(a1..ak) prior with all ai >= 1, one categorical observation changed: Hellinger distance <= rho, table-form HD <= rho^2",
        certificate: Certificate::HdDirichlet,
    },
    Lemma {
        name: "data-processing",
        statement: "Delta_f(bind mu1 K, bind mu2 K) <= Delta_f(mu1, mu2) for a shared kernel K",
        certificate: Certificate::DataProcessing,
    },
    Lemma {
        name: "l1-beta-count",
        statement: "posterior beta parameters under flip-adjacent observation lists differ by at most 1 per component, 2 in l1",
        certificate: Certificate::L1BetaCount,
    },
    Lemma {
        name: "normal-mean-sensitivity",
        statement: "posterior mean of Normal(hM,hV) with known variance kv under single-element l1-adjacent data moves by at most s = hV / (kv + hV)",
        certificate: Certificate::NormalMeanSensitivity,
    },
    Lemma {
        name: "score-sensitivity-1",
        statement: "a score with values in [0,1] has sensitivity 1",
        certificate: Certificate::ScoreSensitivity1,
    },
];

pub fn lemma(name: &str) -> Option<&'static Lemma> {
    LEMMAS.iter().find(|l| l.name == name)
}

/// Discharges a verification condition.
pub fn discharge(vc: &Vc) -> Outcome {
    match prove(&vc.hyps, &vc.goal) {
        Ok(steps) => Outcome::Proved { steps },
        Err(residual) => Outcome::Unproved { residual: residual.to_string() },
    }
}

/// Proves `goal` from `hyps`, or returns the residual goal that could not be shown.
pub fn prove(hyps: &[Assertion], goal: &Assertion) -> Result<Vec<String>, Assertion> {
    let split = hyps.iter().position(|h| matches!(h, Assertion::Or(_)));
    if let Some(i) = split {
        let Assertion::Or(alts) = &hyps[i] else { unreachable!() };
        let mut steps = vec![format!("case split on {}", hyps[i])];
        for alt in alts {
            let mut hs: Vec<Assertion> = hyps.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, h)| h.clone()).collect();
            hs.push(alt.clone());
            steps.extend(prove(&hs, goal)?);
        }
        return Ok(steps);
    }
    let ctx = Hyps::new(hyps);
    if ctx.absurd {
        return Ok(vec!["contradictory hypotheses".into()]);
    }
    ctx.prove(goal)
}

/// Whether `a` and `b` are equal by congruence under `hyps`.
pub fn equal_terms(hyps: &[Assertion], a: &Term, b: &Term) -> bool {
    Hyps::new(hyps).eq(a, b)
}

/// Canonical representative of `t` under the equalities in `hyps`.
pub fn canonical(hyps: &[Assertion], t: &Term) -> Term {
    Hyps::new(hyps).canon(t)
}

/// Upper bound on `|l - r|` together with its justification.
pub fn sensitivity(hyps: &[Assertion], l: &Term, r: &Term) -> Option<(Poly, Vec<String>)> {
    Hyps::new(hyps).diff_bound(l, r)
}

fn rank(t: &Term) -> u8 {
    match t {
        Term::Var(_) => 0,
        Term::Rel(_, Side::L) => 1,
        Term::Rel(_, Side::R) => 2,
        _ => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval {
    lo: Option<f64>,
    hi: Option<f64>,
}

impl Interval {
    const TOP: Interval = Interval { lo: None, hi: None };

    fn point(x: f64) -> Interval {
        Interval { lo: Some(x), hi: Some(x) }
    }

    fn nonneg(&self) -> bool {
        self.lo.map_or(false, |l| l >= 0.0)
    }

    fn add(self, o: Interval) -> Interval {
        let f = |a: Option<f64>, b: Option<f64>| Some(a? + b?);
        Interval { lo: f(self.lo, o.lo), hi: f(self.hi, o.hi) }
    }

    fn neg(self) -> Interval {
        Interval { lo: self.hi.map(|x| -x), hi: self.lo.map(|x| -x) }
    }

    fn mul(self, o: Interval) -> Interval {
        match (self.lo, self.hi, o.lo, o.hi) {
            (Some(a), Some(b), Some(c), Some(d)) => {
                let ps = [a * c, a * d, b * c, b * d];
                Interval { lo: ps.iter().cloned().reduce(f64::min), hi: ps.iter().cloned().reduce(f64::max) }
            }
            _ if self.nonneg() && o.nonneg() => Interval {
                lo: Some(self.lo.unwrap() * o.lo.unwrap()),
                hi: match (self.hi, o.hi) {
                    (Some(x), Some(y)) => Some(x * y),
                    _ => None,
                },
            },
            _ => Interval::TOP,
        }
    }

    fn div(self, o: Interval) -> Interval {
        match (o.lo, o.hi) {
            (Some(c), d) if c > 0.0 => {
                let recip = Interval { lo: d.map(|d| 1.0 / d).or(Some(0.0)), hi: Some(1.0 / c) };
                self.mul(recip)
            }
            _ => Interval::TOP,
        }
    }

    fn hull(self, o: Interval) -> Interval {
        let lo = match (self.lo, o.lo) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        };
        let hi = match (self.hi, o.hi) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Interval { lo, hi }
    }
}

type Steps = Vec<String>;

/// Hypotheses in canonical form.
struct Hyps {
    parent: BTreeMap<Term, Term>,
    defs: BTreeMap<Term, Term>,
    phis: Vec<(Term, Term)>,
    diffs: Vec<(Term, Term, Term)>,
    deltas: Vec<(FIdx, Term, Term, Term)>,
    les: Vec<(Term, Term, bool)>,
    preds: Vec<(String, Vec<Term>)>,
    term_eqs: Vec<(Term, Term)>,
    absurd: bool,
}

impl Hyps {
    fn new(hyps: &[Assertion]) -> Hyps {
        let mut h = Hyps {
            parent: BTreeMap::new(),
            defs: BTreeMap::new(),
            phis: Vec::new(),
            diffs: Vec::new(),
            deltas: Vec::new(),
            les: Vec::new(),
            preds: Vec::new(),
            term_eqs: Vec::new(),
            absurd: false,
        };
        let mut flat = Vec::new();
        for a in hyps {
            flatten(a, &mut flat);
        }
        // equalities first so that the remaining facts are stored canonically
        for a in &flat {
            if let Assertion::Eq(x, y) = a {
                h.add_eq(x, y);
            }
        }
        for a in &flat {
            match a {
                Assertion::Eq(..) | Assertion::True => {}
                Assertion::False => h.absurd = true,
                Assertion::Phi(x, y) => {
                    let p = (h.canon(x), h.canon(y));
                    h.phis.push(p);
                }
                Assertion::Le(x, y) | Assertion::Lt(x, y) => {
                    let strict = matches!(a, Assertion::Lt(..));
                    if let Some((l, r)) = abs_diff(x) {
                        let k = h.canon(y);
                        let (l, r) = (h.canon(&l), h.canon(&r));
                        h.diffs.push((l, r, k));
                    } else {
                        let (x, y) = (h.canon(x), h.canon(y));
                        h.les.push((x, y, strict));
                    }
                }
                Assertion::Delta { f, l, r, bound } => {
                    let d = (f.clone(), h.canon(l), h.canon(r), h.canon(bound));
                    h.deltas.push(d);
                }
                Assertion::Pred(n, xs) => {
                    let xs = xs.iter().map(|x| h.canon(x)).collect();
                    h.preds.push((n.clone(), xs));
                }
                _ => {}
            }
        }
        h
    }

    fn find(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        while let Some(p) = self.parent.get(&cur) {
            if *p == cur {
                break;
            }
            cur = p.clone();
        }
        cur
    }

    fn union(&mut self, a: &Term, b: &Term) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (keep, drop) = if (rank(&ra), &ra) <= (rank(&rb), &rb) { (ra, rb) } else { (rb, ra) };
        self.parent.insert(drop.clone(), keep.clone());
        if let Some(d) = self.defs.remove(&drop) {
            match self.defs.get(&keep).cloned() {
                Some(k) => self.term_eqs.push((k, d)),
                None => {
                    self.defs.insert(keep, d);
                }
            }
        }
    }

    fn add_eq(&mut self, x: &Term, y: &Term) {
        match (x.is_var_like(), y.is_var_like()) {
            (true, true) => {
                self.union(x, y);
                if let (Term::Rel(a, s1), Term::Rel(b, s2)) = (x, y) {
                    if a == b && s1 != s2 {
                        self.union(x, &Term::Var(a.clone()));
                    }
                }
            }
            (true, false) | (false, true) => {
                let (v, t) = if x.is_var_like() { (x, y) } else { (y, x) };
                let r = self.find(v);
                match self.defs.get(&r).cloned() {
                    Some(old) => self.term_eqs.push((old, t.clone())),
                    None => {
                        self.defs.insert(r, t.clone());
                    }
                }
            }
            (false, false) => self.term_eqs.push((x.clone(), y.clone())),
        }
    }

    fn canon(&self, t: &Term) -> Term {
        self.canon_in(t, &[], 0)
    }

    fn canon_in(&self, t: &Term, bound: &[String], depth: usize) -> Term {
        if depth > 64 {
            return t.clone();
        }
        match t {
            Term::Var(x) if bound.contains(x) => t.clone(),
            Term::Rel(..) | Term::Var(_) => {
                let r = self.find(t);
                match self.defs.get(&r) {
                    Some(d) => self.canon_in(d, bound, depth + 1),
                    None => r,
                }
            }
            Term::App(f, args) => {
                let args: Vec<Term> = args.iter().map(|a| self.canon_in(a, bound, depth + 1)).collect();
                self.simplify(f, args)
            }
            Term::Lam(xs, b) => {
                let mut inner = bound.to_vec();
                inner.extend(xs.iter().cloned());
                Term::Lam(xs.clone(), Box::new(self.canon_in(b, &inner, depth + 1)))
            }
            other => other.clone(),
        }
    }

    fn simplify(&self, f: &str, args: Vec<Term>) -> Term {
        if let Some(i) = f.strip_prefix("proj").and_then(|s| s.parse::<usize>().ok()) {
            if let [Term::App(g, xs)] = args.as_slice() {
                if g == "tuple" && i < xs.len() {
                    return xs[i].clone();
                }
            }
        }
        if f == "length" && args.len() == 1 {
            for (a, b) in &self.phis {
                if args[0] == *b {
                    return Term::app("length", vec![a.clone()]);
                }
            }
        }
        Term::App(f.to_string(), args)
    }

    fn eq(&self, a: &Term, b: &Term) -> bool {
        let (a, b) = (self.canon(a), self.canon(b));
        if a == b {
            return true;
        }
        self.term_eqs.iter().any(|(x, y)| {
            let (x, y) = (self.canon(x), self.canon(y));
            (x == a && y == b) || (x == b && y == a)
        })
    }

    fn range(&self, t: &Term) -> Interval {
        self.range_d(&self.canon(t), 0)
    }

    fn range_d(&self, t: &Term, depth: usize) -> Interval {
        if depth > 32 {
            return Interval::TOP;
        }
        let r = |x: &Term| self.range_d(x, depth + 1);
        let mut iv = match t {
            Term::Num(q) => return Interval::point(q_to_f64(q)),
            Term::Var(x) if named_constant(x).is_some() => return Interval::point(named_constant(x).unwrap()),
            Term::App(f, a) => match (f.as_str(), a.as_slice()) {
                ("+", [x, y]) => r(x).add(r(y)),
                ("-", [x, y]) => r(x).add(r(y).neg()),
                ("*", [x, y]) => r(x).mul(r(y)),
                ("/", [x, y]) => r(x).div(r(y)),
                ("neg", [x]) => r(x).neg(),
                ("ite", [_, x, y]) => r(x).hull(r(y)),
                ("abs", [x]) => {
                    let i = r(x);
                    let m = match (i.lo, i.hi) {
                        (Some(l), Some(h)) => Some(l.abs().max(h.abs())),
                        _ => None,
                    };
                    Interval { lo: Some(0.0), hi: m }
                }
                ("hellinger" | "statdist", [_, _]) => Interval { lo: Some(0.0), hi: Some(1.0) },
                ("sqrt" | "length" | "exp", [_]) => Interval { lo: Some(0.0), hi: None },
                ("atLeast", [x, m]) => {
                    let (ix, im) = (r(x), r(m));
                    let lo = match (ix.lo, im.lo) {
                        (Some(a), Some(b)) => Some(a.max(b)),
                        (None, b) => b,
                        (a, None) => a,
                    };
                    Interval { lo, hi: None }
                }
                _ => Interval::TOP,
            },
            _ => Interval::TOP,
        };
        for (a, b, _) in &self.les {
            if a == t {
                if let Some(c) = closed_value(b) {
                    iv.hi = Some(iv.hi.map_or(c, |h| h.min(c)));
                }
            }
            if b == t {
                if let Some(c) = closed_value(a) {
                    iv.lo = Some(iv.lo.map_or(c, |l| l.max(c)));
                }
            }
        }
        iv
    }

    fn atom_nonneg(&self, t: &Term) -> bool {
        self.range(t).nonneg()
    }

    fn poly(&self, t: &Term) -> Poly {
        Poly::of_term(&self.canon(t))
    }

    fn prove(&self, goal: &Assertion) -> Result<Steps, Assertion> {
        use Assertion::*;
        match goal {
            True => Ok(vec!["trivial".into()]),
            False => Err(goal.clone()),
            And(xs) => {
                let mut steps = Vec::new();
                for x in xs {
                    steps.extend(self.prove(x)?);
                }
                Ok(steps)
            }
            Or(xs) => xs.iter().find_map(|x| self.prove(x).ok()).ok_or_else(|| goal.clone()),
            Implies(a, b) => {
                let mut hs = self.raw_with(a);
                hs.push((**a).clone());
                prove(&hs, b).map_err(|_| goal.clone())
            }
            Forall(_, _, body) => self.prove(body).map_err(|_| goal.clone()),
            Exists(..) => Err(goal.clone()),
            Not(inner) => match inner.as_ref() {
                False => Ok(vec!["trivial".into()]),
                Eq(a, b) => match (closed_value(&self.canon(a)), closed_value(&self.canon(b))) {
                    (Some(x), Some(y)) if x != y => Ok(vec!["distinct constants".into()]),
                    _ => Err(goal.clone()),
                },
                _ => Err(goal.clone()),
            },
            Eq(a, b) => {
                if self.eq(a, b) {
                    return Ok(vec![format!("congruence: {} = {}", self.canon(a), self.canon(b))]);
                }
                if self.poly(a) == self.poly(b) {
                    return Ok(vec!["ring normalization".into()]);
                }
                Err(goal.clone())
            }
            Le(a, b) | Lt(a, b) => {
                let strict = matches!(goal, Lt(..));
                if !strict {
                    if let Some((l, r)) = abs_diff(a) {
                        let (k, mut steps) = self.diff_bound(&l, &r).ok_or_else(|| goal.clone())?;
                        steps.extend(self.prove_le(&k.to_term(), b, false).ok_or_else(|| goal.clone())?);
                        return Ok(steps);
                    }
                }
                self.prove_le(a, b, strict).ok_or_else(|| goal.clone())
            }
            Phi(a, b) => {
                let (a, b) = (self.canon(a), self.canon(b));
                if a == b {
                    return Ok(vec!["adjacency is reflexive".into()]);
                }
                if self.phis.iter().any(|(x, y)| (x == &a && y == &b) || (x == &b && y == &a)) {
                    return Ok(vec!["hypothesis".into()]);
                }
                Err(goal.clone())
            }
            Delta { f, l, r, bound } => {
                if matches!(self.canon(bound), Term::Inf) {
                    return Ok(vec!["unbounded index".into()]);
                }
                let (k, mut steps) = self.delta_bound(f, l, r).ok_or_else(|| goal.clone())?;
                steps.extend(self.prove_le(&k.to_term(), bound, false).ok_or_else(|| goal.clone())?);
                Ok(steps)
            }
            InF(FIdx::EpsD(p)) => self.prove_le(&Term::int(0), &p.to_term(), false).map(|mut s| {
                s.insert(0, "epsilon-distance is an f-divergence for epsilon >= 0".into());
                s
            }).ok_or_else(|| goal.clone()),
            InF(_) => Ok(vec!["f-divergence".into()]),
            Pred(n, xs) => {
                let xs: Vec<Term> = xs.iter().map(|x| self.canon(x)).collect();
                if self.preds.iter().any(|(m, ys)| m == n && *ys == xs) {
                    return Ok(vec!["hypothesis".into()]);
                }
                if self.family_pred(n, &xs) {
                    return Ok(vec![format!("{}: every parameter >= 1", n)]);
                }
                Err(goal.clone())
            }
        }
    }

    /// Hypotheses are kept canonical, so nested implications re-run from the raw form.
    fn raw_with(&self, _extra: &Assertion) -> Vec<Assertion> {
        let mut out = Vec::new();
        for (k, v) in &self.parent {
            if k != v {
                out.push(Assertion::Eq(k.clone(), v.clone()));
            }
        }
        for (k, v) in &self.defs {
            out.push(Assertion::Eq(k.clone(), v.clone()));
        }
        for (a, b) in &self.term_eqs {
            out.push(Assertion::Eq(a.clone(), b.clone()));
        }
        for (a, b) in &self.phis {
            out.push(Assertion::Phi(a.clone(), b.clone()));
        }
        for (l, r, k) in &self.diffs {
            out.push(Assertion::abs_diff_le(l.clone(), r.clone(), k.clone()));
        }
        for (f, l, r, b) in &self.deltas {
            out.push(Assertion::Delta { f: f.clone(), l: l.clone(), r: r.clone(), bound: b.clone() });
        }
        for (a, b, s) in &self.les {
            out.push(if *s { Assertion::Lt(a.clone(), b.clone()) } else { Assertion::Le(a.clone(), b.clone()) });
        }
        for (n, xs) in &self.preds {
            out.push(Assertion::Pred(n.clone(), xs.clone()));
        }
        out
    }

    fn family_pred(&self, n: &str, xs: &[Term]) -> bool {
        match n {
            "beta1" | "dirichlet1" => !xs.is_empty() && xs.iter().all(|x| self.range(x).lo.map_or(false, |l| l >= 1.0)),
            "pos" => xs.iter().all(|x| self.atom_nonneg(x)),
            _ => false,
        }
    }

    fn prove_le(&self, a: &Term, b: &Term, strict: bool) -> Option<Steps> {
        let (ca, cb) = (self.canon(a), self.canon(b));
        if matches!(cb, Term::Inf) {
            return Some(vec!["unbounded".into()]);
        }
        let d = Poly::of_term(&cb).sub(&Poly::of_term(&ca));
        let nn = |t: &Term| self.atom_nonneg(t);
        if !strict && d.nonneg(&nn) {
            return Some(vec![format!("arithmetic: {} <= {}", ca, cb)]);
        }
        if strict {
            if let Some(c) = d.as_constant() {
                if c.is_positive() {
                    return Some(vec![format!("arithmetic: {} < {}", ca, cb)]);
                }
            }
        }
        for (x, y, s) in &self.les {
            if strict && !*s {
                continue;
            }
            let lo = Poly::of_term(x).sub(&Poly::of_term(&ca));
            let hi = Poly::of_term(&cb).sub(&Poly::of_term(y));
            if lo.nonneg(&nn) && hi.nonneg(&nn) {
                let op = if *s { "<" } else { "<=" };
                return Some(vec![format!("hypothesis {} {} {}", x, op, y)]);
            }
        }
        let iv = self.range_d(&Poly::of_term(&cb).sub(&Poly::of_term(&ca)).to_term(), 0);
        match iv.lo {
            Some(l) if l > 0.0 || (!strict && l >= 0.0) => Some(vec![format!("interval: {} - {} >= {}", cb, ca, l)]),
            _ => None,
        }
    }

    /// Upper bound on `|l - r|`.
    fn diff_bound(&self, l: &Term, r: &Term) -> Option<(Poly, Steps)> {
        let (cl, cr) = (self.canon(l), self.canon(r));
        self.diff_bound_c(&cl, &cr, 0)
    }

    fn diff_bound_c(&self, l: &Term, r: &Term, depth: usize) -> Option<(Poly, Steps)> {
        if depth > 32 {
            return None;
        }
        if l == r || self.eq(l, r) {
            return Some((Poly::zero(), vec![format!("congruence: {} = {}", l, r)]));
        }
        for (x, y, k) in &self.diffs {
            if (x == l && y == r) || (x == r && y == l) {
                return Some((Poly::of_term(k), vec![format!("hypothesis |{} - {}| <= {}", x, y, k)]));
            }
        }
        if let Some(b) = self.lemma_diff(l, r) {
            return Some(b);
        }
        let structural = match (l, r) {
            (Term::App(f, a), Term::App(g, b)) if f == g && a.len() == b.len() => self.structural_diff(f, a, b, depth),
            _ => None,
        };
        if structural.is_some() {
            return structural;
        }
        let (il, ir) = (self.range_d(l, 0), self.range_d(r, 0));
        let hull = il.hull(ir);
        if let (Some(lo), Some(hi)) = (hull.lo, hull.hi) {
            let w = hi - lo;
            if lo == 0.0 && hi == 1.0 {
                return Some((Poly::int(1), vec![format!("score-sensitivity-1: {} and {} range over [0,1]", l, r)]));
            }
            let q = num_rational::BigRational::from_float(w)?;
            return Some((Poly::constant(q), vec![format!("range width {}", w)]));
        }
        None
    }

    fn structural_diff(&self, f: &str, a: &[Term], b: &[Term], depth: usize) -> Option<(Poly, Steps)> {
        let same = |i: usize| self.eq(&a[i], &b[i]);
        match (f, a.len()) {
            ("neg", 1) => self.diff_bound_c(&a[0], &b[0], depth + 1),
            ("+" | "-", 2) => {
                let (k1, mut s1) = self.diff_bound_c(&a[0], &b[0], depth + 1)?;
                let (k2, s2) = self.diff_bound_c(&a[1], &b[1], depth + 1)?;
                s1.extend(s2);
                Some((k1.add(&k2), s1))
            }
            ("*", 2) if same(0) && self.atom_nonneg(&a[0]) => {
                let (k, s) = self.diff_bound_c(&a[1], &b[1], depth + 1)?;
                Some((Poly::of_term(&a[0]).mul(&k), s))
            }
            ("*", 2) if same(1) && self.atom_nonneg(&a[1]) => {
                let (k, s) = self.diff_bound_c(&a[0], &b[0], depth + 1)?;
                Some((Poly::of_term(&a[1]).mul(&k), s))
            }
            ("atLeast", 2) if same(1) => {
                let (k, mut s) = self.diff_bound_c(&a[0], &b[0], depth + 1)?;
                s.push("atLeast is 1-Lipschitz".into());
                Some((k, s))
            }
            ("hellinger", 2) if same(1) => {
                let (d, mut s) = self.delta_bound(&FIdx::HD, &a[0], &b[0])?;
                let k = d.sqrt()?;
                s.push(format!("triangle inequality for the Hellinger distance: |H(x, o) - H(y, o)| <= H(x, y) = sqrt(HD) <= {}", k));
                Some((k, s))
            }
            ("statdist", 2) if same(1) => {
                let (d, mut s) = self.delta_bound(&FIdx::SD, &a[0], &b[0])?;
                s.push(format!("triangle inequality for statistical distance: <= {}", d));
                Some((d, s))
            }
            _ => None,
        }
    }

    fn lemma_diff(&self, l: &Term, r: &Term) -> Option<(Poly, Steps)> {
        // proj_i(getParams(infer(fold(...)))) for beta-bernoulli and dirichlet-multinomial folds
        if let (Term::App(pl, al), Term::App(pr, ar)) = (l, r) {
            if pl == pr && pl.starts_with("proj") {
                if let (Some((fl, ll, priorl)), Some((_, lr, priorr))) = (params_of_fold(&al[0]), params_of_fold(&ar[0])) {
                    if matches!(fl, "fold.bernoulli" | "fold.multinomial") && self.eq(priorl, priorr) && self.adjacent(ll, lr) {
                        return Some((Poly::int(1), vec![format!("l1-beta-count: {} of the posterior parameters moves by at most 1", pl)]));
                    }
                }
            }
            if pl == "getMean" && pr == "getMean" {
                if let (Some(("fold.normal", args_l)), Some(("fold.normal", args_r))) = (infer_fold(&al[0]), infer_fold(&ar[0])) {
                    let (kvl, ll, priorl) = (&args_l[0], &args_l[1], &args_l[2]);
                    let (kvr, lr, priorr) = (&args_r[0], &args_r[1], &args_r[2]);
                    if self.eq(kvl, kvr) && self.eq(priorl, priorr) && self.adjacent(ll, lr) {
                        if let Term::App(ran, p) = priorl {
                            if let (true, [Term::App(nm, np)]) = (ran == "ran", p.as_slice()) {
                                if nm == "normal" && np.len() == 2 {
                                    let hv = np[1].clone();
                                    let s = Term::app("/", vec![hv.clone(), Term::app("+", vec![kvl.clone(), hv])]);
                                    return Some((Poly::atom(s.clone()), vec![format!("normal-mean-sensitivity: posterior mean moves by at most {}", s)]));
                                }
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn adjacent(&self, a: &Term, b: &Term) -> bool {
        let (a, b) = (self.canon(a), self.canon(b));
        a == b || self.phis.iter().any(|(x, y)| (x == &a && y == &b) || (x == &b && y == &a))
    }

    /// Upper bound on `Delta_f(l, r)`.
    fn delta_bound(&self, f: &FIdx, l: &Term, r: &Term) -> Option<(Poly, Steps)> {
        let (cl, cr) = (self.canon(l), self.canon(r));
        self.delta_bound_c(f, &cl, &cr, 0)
    }

    fn delta_bound_c(&self, f: &FIdx, l: &Term, r: &Term, depth: usize) -> Option<(Poly, Steps)> {
        if depth > 16 {
            return None;
        }
        if l == r || self.eq(l, r) {
            return Some((Poly::zero(), vec![format!("congruence: identical distributions {}", l)]));
        }
        for (g, x, y, b) in &self.deltas {
            if x == l && y == r && self.idx_le(g, f) {
                return Some((Poly::of_term(b), vec![format!("hypothesis Delta[{}]({}, {}) <= {}", g, x, y, b)]));
            }
        }
        let (Term::App(fl, al), Term::App(fr, ar)) = (l, r) else { return None };
        if fl != fr || al.len() != ar.len() {
            return None;
        }
        match fl.as_str() {
            "infer" | "ran" => {
                let (k, mut s) = self.delta_bound_c(f, &al[0], &ar[0], depth + 1)?;
                s.push(format!("{} preserves the denotation", fl));
                Some((k, s))
            }
            "mlet" if self.eq(&al[1], &ar[1]) => {
                let (k, mut s) = self.delta_bound_c(f, &al[0], &ar[0], depth + 1)?;
                s.push("data-processing: shared continuation".into());
                Some((k, s))
            }
            "fold.bernoulli" | "fold.multinomial" | "obs.bernoulli" | "obs.multinomial" => {
                let (ll, pl, lr, pr) = (&al[0], &al[1], &ar[0], &ar[1]);
                if !self.eq(pl, pr) {
                    return None;
                }
                let single = fl.starts_with("obs.");
                if !single && !self.adjacent(ll, lr) {
                    return None;
                }
                let (fam, params) = prior_family(pl)?;
                let mut steps = vec![];
                if !single {
                    steps.push(format!("{}: posterior is invariant under reordering, adjacent lists differ in one observation", fl));
                }
                let bernoulli = fl.ends_with("bernoulli");
                let params_ge1 = |n: &str| self.family_pred(n, &params);
                let (name, bound) = match (f, fam, bernoulli) {
                    (FIdx::HD, "beta", true) if params_ge1("beta1") => ("hd-beta", Poly::atom(Term::var("rho")).mul(&Poly::atom(Term::var("rho")))),
                    (FIdx::SD, "beta", true) if params_ge1("beta1") => ("sd-beta", Poly::atom(Term::var("zeta"))),
                    (FIdx::HD, "dirichlet", false) if params_ge1("dirichlet1") => {
                        ("hd-dirichlet", Poly::atom(Term::var("rho")).mul(&Poly::atom(Term::var("rho"))))
                    }
                    _ => return None,
                };
                if !single {
                    steps.push("shared observations only increase the prior parameters".into());
                }
                steps.push(format!("{} at prior {}", name, pl));
                if !single {
                    steps.push("data-processing for the remaining observations".into());
                }
                Some((bound, steps))
            }
            _ => None,
        }
    }

    fn idx_le(&self, hyp: &FIdx, goal: &FIdx) -> bool {
        match (hyp, goal) {
            (FIdx::EpsD(a), FIdx::EpsD(b)) => b.sub(a).nonneg(&|t| self.atom_nonneg(t)),
            _ => hyp == goal,
        }
    }
}

fn flatten(a: &Assertion, out: &mut Vec<Assertion>) {
    match a {
        Assertion::And(xs) => xs.iter().for_each(|x| flatten(x, out)),
        other => out.push(other.clone()),
    }
}

fn abs_diff(t: &Term) -> Option<(Term, Term)> {
    match t {
        Term::App(f, a) if f == "abs" && a.len() == 1 => match &a[0] {
            Term::App(g, b) if g == "-" && b.len() == 2 => Some((b[0].clone(), b[1].clone())),
            _ => None,
        },
        _ => None,
    }
}

fn closed_value(t: &Term) -> Option<f64> {
    super::parse::eval_closed(t)
}

/// `infer(fold.X(args))` -> (`fold.X`, args)
fn infer_fold(t: &Term) -> Option<(&str, &[Term])> {
    match t {
        Term::App(i, a) if i == "infer" && a.len() == 1 => match &a[0] {
            Term::App(f, args) if f.starts_with("fold.") => Some((f.as_str(), args.as_slice())),
            _ => None,
        },
        _ => None,
    }
}

/// `getParams(infer(fold.X(list, prior)))` -> (`fold.X`, list, prior)
fn params_of_fold(t: &Term) -> Option<(&str, &Term, &Term)> {
    match t {
        Term::App(g, a) if g == "getParams" && a.len() == 1 => {
            let (f, args) = infer_fold(&a[0])?;
            match args {
                [l, p] => Some((f, l, p)),
                _ => None,
            }
        }
        _ => None,
    }
}

/// `ran(beta(a, b))` / `ran(uniform())` / `ran(dirichlet(..))` -> family and parameters.
fn prior_family(t: &Term) -> Option<(&'static str, Vec<Term>)> {
    let Term::App(r, a) = t else { return None };
    if r != "ran" || a.len() != 1 {
        return None;
    }
    match &a[0] {
        Term::App(f, ps) if f == "beta" && ps.len() == 2 => Some(("beta", ps.clone())),
        Term::App(f, ps) if f == "uniform" && ps.is_empty() => Some(("beta", vec![Term::int(1), Term::int(1)])),
        Term::App(f, ps) if f == "dirichlet" => Some(("dirichlet", ps.clone())),
        _ => None,
    }
}

/// Whether `x` is one of the named lemma-library constants.
pub fn is_library_constant(x: &str) -> bool {
    named_constant(x).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reltype::parse::parse_assertion;

    fn a(s: &str) -> Assertion {
        parse_assertion(s).unwrap()
    }

    fn proves(hyps: &[&str], goal: &str) -> bool {
        let hs: Vec<Assertion> = hyps.iter().map(|h| a(h)).collect();
        prove(&hs, &a(goal)).is_ok()
    }

    #[test]
    fn reflexivity_of_symbolic_bounds() {
        assert!(proves(&[], "delta <= delta"));
        assert!(proves(&["0 <= eps.L", "eps.L = eps.R"], "eps <= 2 * eps"));
        assert!(!proves(&[], "eps <= 2 * eps"));
    }

    #[test]
    fn congruence_through_definitions() {
        assert!(proves(&["y.L = y.R", "v.L = cons(y.L, t)", "v.R = cons(y.R, t)"], "v.L = v.R"));
        assert!(!proves(&["v.L = cons(y.L, t)", "v.R = cons(y.R, t)"], "v.L = v.R"));
    }

    #[test]
    fn hd_beta_lemma_on_one_observation() {
        let hyps = ["a.L = a.R", "b.L = b.R", "a.L >= 1", "b.L >= 1"];
        let goal = "Delta[HD](obs.bernoulli(d.L, ran(beta(a.L, b.L))), obs.bernoulli(d.R, ran(beta(a.R, b.R)))) <= rho";
        let hs: Vec<Assertion> = hyps.iter().map(|h| a(h)).collect();
        let steps = prove(&hs, &a(goal)).unwrap();
        assert!(steps.iter().any(|s| s.starts_with("hd-beta")), "{:?}", steps);
    }

    #[test]
    fn kl_goal_has_no_library_entry() {
        let hyps = ["a.L = a.R", "b.L = b.R", "a.L >= 1", "b.L >= 1"];
        let goal = "Delta[KL](obs.bernoulli(d.L, ran(beta(a.L, b.L))), obs.bernoulli(d.R, ran(beta(a.R, b.R)))) <= 0.1";
        assert!(!proves(&hyps, goal));
    }

    #[test]
    fn hd_lemma_needs_parameters_at_least_one() {
        let hyps = ["a.L = a.R", "b.L = b.R", "a.L >= 0.5", "b.L >= 0.5"];
        let goal = "Delta[HD](obs.bernoulli(d.L, ran(beta(a.L, b.L))), obs.bernoulli(d.R, ran(beta(a.R, b.R)))) <= rho";
        assert!(!proves(&hyps, goal));
    }

    #[test]
    fn bounded_score_has_sensitivity_one() {
        assert!(proves(&[], "|ite(y.L = o, 1, 0) - ite(y.R = o, 1, 0)| <= 1"));
        assert!(!proves(&[], "|ite(y.L = o, 1, 0) - ite(y.R = o, 1, 0)| <= 0.5"));
    }

    #[test]
    fn hypotheses_bound_strict_inequalities() {
        assert!(proves(&["eps.L = eps.R", "eps.L < 1", "0 <= eps.L"], "1 * eps < 1"));
        assert!(!proves(&["eps.L = eps.R", "0 <= eps.L"], "eps < 1"));
    }

    #[test]
    fn disjunctive_hypotheses_split() {
        assert!(proves(&["x.L = 0 || x.L = 1"], "x.L <= 1"));
    }
}
