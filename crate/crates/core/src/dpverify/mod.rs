//! Brute-force privacy checks: enumerate related inputs, evaluate the exact output
//! distributions and measure f-divergences in both orientations.

mod lemmas;
mod suites;

pub use lemmas::{check_lemma_certificates, LemmaCheck, LemmaReport};
pub use suites::{check_composition_and_dpi, witness_search, SuiteLine, SuiteReport};

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{fdiv, normal_cdf, Dist, FDivKind};
use crate::eval::{EvalConfig, EvalError, Evaluator, Valuation, Value};
use crate::scalar::Scalar;
use crate::syntax::Expr;

/// Predicate deciding whether two inputs are adjacent.
pub type RelFn<P> = Arc<dyn Fn(&Value<'static, P>, &Value<'static, P>) -> bool + Send + Sync>;

/// Adjacency relations over program inputs.
#[derive(Clone)]
pub enum AdjacencyRel<P: Scalar> {
    /// Same-length lists differing in exactly one entry (boolean records, categories), or two
    /// distinct scalars.
    BoolListFlip,
    /// Same-length real lists. `multi = false`: one entry moves by at most 1;
    /// `multi = true`: the entries move by at most 1 in total.
    RealListL1 { multi: bool },
    Custom(RelFn<P>),
}

impl<P: Scalar> fmt::Debug for AdjacencyRel<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdjacencyRel::BoolListFlip => write!(f, "BoolListFlip"),
            AdjacencyRel::RealListL1 { multi } => write!(f, "RealListL1 {{ multi: {} }}", multi),
            AdjacencyRel::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl<P: Scalar> fmt::Display for AdjacencyRel<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdjacencyRel::BoolListFlip => write!(f, "flip"),
            AdjacencyRel::RealListL1 { multi: false } => write!(f, "l1"),
            AdjacencyRel::RealListL1 { multi: true } => write!(f, "l1-multi"),
            AdjacencyRel::Custom(_) => write!(f, "custom"),
        }
    }
}

const L1_TOL: f64 = 1e-9;

impl<P: Scalar> AdjacencyRel<P> {
    pub fn custom(f: impl Fn(&Value<'static, P>, &Value<'static, P>) -> bool + Send + Sync + 'static) -> Self {
        AdjacencyRel::Custom(Arc::new(f))
    }

    /// Any two distinct inputs are adjacent.
    pub fn any() -> Self {
        AdjacencyRel::custom(|a, b| a != b)
    }

    pub fn related(&self, a: &Value<'static, P>, b: &Value<'static, P>) -> bool {
        match self {
            AdjacencyRel::BoolListFlip => match (a, b) {
                (Value::List(xs), Value::List(ys)) if xs.len() == ys.len() => {
                    xs.iter().zip(ys.iter()).all(|(x, y)| x.kind() == y.kind()) && xs.iter().zip(ys.iter()).filter(|(x, y)| x != y).count() == 1
                }
                (Value::List(_), _) | (_, Value::List(_)) => false,
                _ => a.kind() == b.kind() && a != b,
            },
            AdjacencyRel::RealListL1 { multi } => {
                let (xs, ys) = match (a, b) {
                    (Value::List(xs), Value::List(ys)) if xs.len() == ys.len() => (xs.as_slice(), ys.as_slice()),
                    (Value::Num(_), Value::Num(_)) => (std::slice::from_ref(a), std::slice::from_ref(b)),
                    _ => return false,
                };
                let mut moved = 0;
                let mut total = 0.0;
                for (x, y) in xs.iter().zip(ys) {
                    let (Some(x), Some(y)) = (x.as_num(), y.as_num()) else { return false };
                    let d = (x.to_f64_lossy() - y.to_f64_lossy()).abs();
                    if d > 0.0 {
                        moved += 1;
                        total += d;
                    }
                }
                if *multi {
                    moved >= 1 && total <= 1.0 + L1_TOL
                } else {
                    moved == 1 && total <= 1.0 + L1_TOL
                }
            }
            AdjacencyRel::Custom(f) => f(a, b),
        }
    }
}

/// A finite input space.
#[derive(Debug, Clone)]
pub enum InputSpace<P: Scalar> {
    /// Boolean lists of every length up to `max_len`.
    BoolLists { max_len: usize },
    /// Lists of every length up to `max_len` over the given element values.
    RealLists { values: Vec<P>, max_len: usize },
    Explicit(Vec<Value<'static, P>>),
}

impl<P: Scalar> InputSpace<P> {
    /// Number of inputs, `None` on overflow.
    pub fn size(&self) -> Option<usize> {
        let lists = |k: usize, l: usize| (0..=l).try_fold(0usize, |acc, n| acc.checked_add(k.checked_pow(n as u32)?));
        match self {
            InputSpace::BoolLists { max_len } => lists(2, *max_len),
            InputSpace::RealLists { values, max_len } => lists(values.len(), *max_len),
            InputSpace::Explicit(v) => Some(v.len()),
        }
    }

    pub fn enumerate(&self) -> Vec<Value<'static, P>> {
        let lists = |elems: Vec<Value<'static, P>>, max_len: usize| {
            let mut out = vec![Vec::new()];
            let mut layer: Vec<Vec<Value<'static, P>>> = vec![Vec::new()];
            for _ in 0..max_len {
                layer = layer
                    .iter()
                    .flat_map(|l| {
                        elems.iter().map(move |e| {
                            let mut l = l.clone();
                            l.push(e.clone());
                            l
                        })
                    })
                    .collect();
                out.extend(layer.iter().cloned());
            }
            out.into_iter().map(Value::list).collect()
        };
        match self {
            InputSpace::BoolLists { max_len } => lists(vec![Value::Bool(false), Value::Bool(true)], *max_len),
            InputSpace::RealLists { values, max_len } => lists(values.iter().cloned().map(Value::num).collect(), *max_len),
            InputSpace::Explicit(v) => v.clone(),
        }
    }
}

/// Evaluation settings and resource caps of a brute-force run.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub eval: EvalConfig,
    /// Largest input space accepted without `allow_large`.
    pub max_inputs: usize,
    pub allow_large: bool,
    /// Discretization slack added to the claimed bound.
    pub slack: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { eval: EvalConfig::default(), max_inputs: 4096, allow_large: false, slack: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("input space has {size} elements, above the cap of {cap} (raise it explicitly to proceed)")]
    TooLarge { size: String, cap: usize },
    #[error("evaluation on input {input} failed: {err}")]
    Eval { input: String, err: EvalError },
    #[error("on input {input} the program returned {found}, not a distribution")]
    NotADistribution { input: String, found: String },
    #[error("on input {input} the output distribution has a non-data value {value}")]
    NonData { input: String, value: String },
    #[error("on input {input}: {msg}")]
    Dist { input: String, msg: String },
}

/// Divergences measured on one related pair, in both orientations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMeasure {
    pub left: String,
    pub right: String,
    /// `Delta(M(left), M(right))`
    pub forward: f64,
    /// `Delta(M(right), M(left))`
    pub backward: f64,
}

impl PairMeasure {
    pub fn max(&self) -> f64 {
        self.forward.max(self.backward)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DPReport {
    pub kind: FDivKind,
    pub claimed_delta: f64,
    pub slack: f64,
    pub inputs: usize,
    pub pairs: Vec<PairMeasure>,
    pub worst: Option<PairMeasure>,
    pub max_divergence: f64,
    pub pass: bool,
}

impl fmt::Display for DPReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: max {} = {:.3e} over {} pairs of {} inputs, claimed {} + slack {:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.kind,
            self.max_divergence,
            self.pairs.len(),
            self.inputs,
            self.claimed_delta,
            self.slack
        )?;
        if let Some(w) = &self.worst {
            write!(f, "; worst pair {} / {}", w.left, w.right)?;
        }
        Ok(())
    }
}

pub type OutputDist<P> = Dist<Value<'static, P>, P>;

/// Output distribution of `prog input trailing..`.
pub fn run_program<P: Scalar>(prog: &Expr, input: &Value<'static, P>, trailing: &[Value<'static, P>], cfg: &EvalConfig) -> Result<OutputDist<P>, VerifyError> {
    let shown = || input.to_string();
    let ev = Evaluator::new(cfg.clone());
    let eval_err = |err| VerifyError::Eval { input: shown(), err };
    let f = ev.eval_closed(&Valuation::new(), prog).map_err(eval_err)?;
    let args = std::iter::once(input).chain(trailing).map(|v| v.to_owned_data().expect("inputs are data"));
    let out = ev.apply_all(f, args, &prog.span).map_err(eval_err)?;
    let Value::Dist(d) = out else {
        return Err(VerifyError::NotADistribution { input: shown(), found: out.kind().to_string() });
    };
    let pmf = d.dist().map_err(|e| VerifyError::Dist { input: shown(), msg: e.to_string() })?;
    let mut pairs = Vec::with_capacity(pmf.len());
    for (v, p) in pmf.iter() {
        let owned = v.to_owned_data().ok_or_else(|| VerifyError::NonData { input: shown(), value: v.to_string() })?;
        pairs.push((owned, p.clone()));
    }
    Dist::from_pairs(pairs).map_err(|e| VerifyError::Dist { input: shown(), msg: e.to_string() })
}

/// Related unordered pairs `(i, j)`, `i < j`, of an enumerated input space.
pub fn related_pairs<P: Scalar>(inputs: &[Value<'static, P>], rel: &AdjacencyRel<P>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            if rel.related(&inputs[i], &inputs[j]) || rel.related(&inputs[j], &inputs[i]) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Checks the claim `Delta_kind(M(d), M(d')) <= delta` for every related pair of inputs,
/// where `M(d) = prog d trailing..`.
pub fn check_program<P: Scalar>(
    prog: &Expr,
    trailing: &[Value<'static, P>],
    rel: &AdjacencyRel<P>,
    space: &InputSpace<P>,
    kind: FDivKind,
    delta: f64,
    opts: &VerifyOptions,
) -> Result<DPReport, VerifyError> {
    let size = space.size();
    match size {
        Some(n) if n <= opts.max_inputs || opts.allow_large => {}
        _ => {
            let size = size.map_or_else(|| "more than usize::MAX".to_string(), |n| n.to_string());
            return Err(VerifyError::TooLarge { size, cap: opts.max_inputs });
        }
    }
    let inputs = space.enumerate();
    let pairs = related_pairs(&inputs, rel);
    let mut needed = vec![false; inputs.len()];
    for &(i, j) in &pairs {
        needed[i] = true;
        needed[j] = true;
    }
    let outputs: Vec<Option<OutputDist<P>>> = inputs
        .par_iter()
        .zip(needed.par_iter())
        .map(|(d, &need)| if need { run_program(prog, d, trailing, &opts.eval).map(Some) } else { Ok(None) })
        .collect::<Result<_, _>>()?;
    let measures: Vec<PairMeasure> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (outputs[i].as_ref().unwrap(), outputs[j].as_ref().unwrap());
            PairMeasure { left: inputs[i].to_string(), right: inputs[j].to_string(), forward: fdiv(kind, a, b), backward: fdiv(kind, b, a) }
        })
        .collect();
    Ok(report(kind, delta, opts.slack, inputs.len(), measures))
}

fn report(kind: FDivKind, delta: f64, slack: f64, inputs: usize, pairs: Vec<PairMeasure>) -> DPReport {
    // first maximal pair, so the report does not depend on thread scheduling
    let worst = pairs.iter().fold(None::<&PairMeasure>, |best, p| match best {
        Some(b) if b.max() >= p.max() => Some(b),
        _ => Some(p),
    });
    let max_divergence = worst.map_or(0.0, |w| w.max());
    DPReport { kind, claimed_delta: delta, slack, inputs, worst: worst.cloned(), max_divergence, pass: max_divergence <= delta + slack, pairs }
}

/// Per-invocation mass outside the Laplace window `x +- 12/eps`.
pub const LAPLACE_TAIL: f64 = 6.144212353328210e-6;

/// Per-invocation mass outside the Gaussian window `x +- 8 sigma`.
pub fn gauss_tail() -> f64 {
    2.0 * normal_cdf(-8.0)
}

/// Slack for programs whose binned mechanisms share one output lattice across inputs.
///
/// Binning on a common lattice is post-processing, so only the tail folding into the end
/// cells can raise the measured eps-distance: each invocation moves at most its tail mass
/// on either side, which costs at most `(1 + e^eps) * tail`.
pub fn folding_slack(eps: f64, laplace_calls: usize, gauss_calls: usize) -> f64 {
    (1.0 + eps.exp()) * (laplace_calls as f64 * LAPLACE_TAIL + gauss_calls as f64 * gauss_tail())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn opts() -> VerifyOptions {
        VerifyOptions::default()
    }

    #[test]
    fn identity_leaks() {
        let p = parse("fun d -> return d").unwrap();
        let r = check_program::<f64>(&p, &[], &AdjacencyRel::BoolListFlip, &InputSpace::BoolLists { max_len: 2 }, FDivKind::EpsD(5.0), 0.0, &opts()).unwrap();
        assert!(!r.pass);
        assert_eq!(r.max_divergence, 1.0);
    }

    #[test]
    fn constant_is_private() {
        let p = parse("fun d -> return 0").unwrap();
        let r = check_program::<f64>(&p, &[], &AdjacencyRel::BoolListFlip, &InputSpace::BoolLists { max_len: 3 }, FDivKind::EpsD(0.0), 0.0, &opts()).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_divergence, 0.0);
        assert_eq!(r.inputs, 15);
    }

    #[test]
    fn randomized_response_lists() {
        let p = parse(
            "let score x y = if x = y then 1 else 0
             let rec addNoise db eps = match db with
               | [] -> return []
               | y :: yl -> mlet yn = expMech(eps, score, y) in mlet yln = addNoise yl eps in return (yn :: yln)
             let main d = addNoise d 1",
        )
        .unwrap();
        let r = check_program::<f64>(&p, &[], &AdjacencyRel::BoolListFlip, &InputSpace::BoolLists { max_len: 4 }, FDivKind::EpsD(1.0), 0.0, &opts()).unwrap();
        assert!(r.pass, "{}", r);
        assert!(r.max_divergence <= 1e-12);
        // every (list, position) gives one ordered pair in each orientation
        assert_eq!(r.pairs.len() * 2, 16 * 4 + 8 * 3 + 4 * 2 + 2);
        let tight = check_program::<f64>(&p, &[], &AdjacencyRel::BoolListFlip, &InputSpace::BoolLists { max_len: 2 }, FDivKind::EpsD(0.4), 0.0, &opts()).unwrap();
        assert!(!tight.pass);
    }

    #[test]
    fn input_space_cap() {
        let p = parse("fun d -> return 0").unwrap();
        let big = InputSpace::<f64>::BoolLists { max_len: 20 };
        let e = check_program(&p, &[], &AdjacencyRel::BoolListFlip, &big, FDivKind::SD, 0.0, &opts()).unwrap_err();
        assert!(matches!(e, VerifyError::TooLarge { .. }));
    }

    #[test]
    fn l1_adjacency_readings() {
        let l = |xs: &[f64]| Value::<f64>::list(xs.iter().map(|x| Value::num(*x)).collect());
        let single = AdjacencyRel::RealListL1 { multi: false };
        let multi = AdjacencyRel::RealListL1 { multi: true };
        assert!(single.related(&l(&[0.0, 1.0]), &l(&[1.0, 1.0])));
        assert!(!single.related(&l(&[0.0, 0.0]), &l(&[0.5, 0.5])));
        assert!(multi.related(&l(&[0.0, 0.0]), &l(&[0.5, 0.5])));
        assert!(!multi.related(&l(&[0.0, 0.0]), &l(&[1.0, 0.5])));
        assert!(!single.related(&l(&[0.0]), &l(&[0.0, 0.0])));
    }

    #[test]
    fn laplace_tail_constant() {
        assert!((LAPLACE_TAIL - (-12.0f64).exp()).abs() < 1e-18);
    }
}
