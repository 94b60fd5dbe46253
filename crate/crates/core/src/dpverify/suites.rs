//! Seeded randomized suites: data processing, composability, monad laws and lifting.

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::{check_diagonal_lifting, composable, dist_bind, dist_unit, fdiv, Dist, FDivKind};
use crate::scalar::Scalar;

/// Aggregate over the random instances of one property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteLine {
    pub suite: String,
    pub trials: usize,
    /// Largest `lhs - rhs` observed (negative when the inequality always held with room).
    pub worst_excess: f64,
    pub tolerance: f64,
    pub failures: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub lines: Vec<SuiteLine>,
    pub pass: bool,
}

const MAX_UNIVERSE: u32 = 6;
const EXACT_TOL: f64 = 1e-12;
const FLOAT_TOL: f64 = 1e-9;

type D<P> = Dist<u32, P>;

trait Masses: Scalar {
    const LABEL: &'static str;
    const TOL: f64;
    fn random(rng: &mut ChaCha8Rng) -> Self;
}

impl Masses for BigRational {
    const LABEL: &'static str = "rational";
    const TOL: f64 = EXACT_TOL;

    fn random(rng: &mut ChaCha8Rng) -> Self {
        BigRational::from_integer(rng.gen_range(0..=6).into())
    }
}

impl Masses for f64 {
    const LABEL: &'static str = "float";
    const TOL: f64 = FLOAT_TOL;

    fn random(rng: &mut ChaCha8Rng) -> Self {
        // a zero now and then so supports differ
        if rng.gen_bool(0.15) {
            0.0
        } else {
            rng.gen::<f64>()
        }
    }
}

fn random_dist<P: Masses>(rng: &mut ChaCha8Rng, n: u32) -> D<P> {
    loop {
        let w: Vec<(u32, P)> = (0..n).map(|v| (v, P::random(rng))).collect();
        if let Ok(d) = Dist::normalized(w) {
            return d;
        }
    }
}

fn random_kernel<P: Masses>(rng: &mut ChaCha8Rng, from: u32, to: u32) -> Vec<D<P>> {
    (0..from).map(|_| random_dist(rng, to)).collect()
}

struct Tally {
    suite: String,
    trials: usize,
    worst: f64,
    tol: f64,
    failures: usize,
}

impl Tally {
    fn new(suite: String, tol: f64) -> Self {
        Tally { suite, trials: 0, worst: f64::NEG_INFINITY, tol, failures: 0 }
    }

    /// Records an instance of `lhs <= rhs`.
    fn le(&mut self, lhs: f64, rhs: f64) {
        self.trials += 1;
        let excess = if lhs == f64::INFINITY && rhs == f64::INFINITY { 0.0 } else { lhs - rhs };
        self.worst = self.worst.max(excess);
        if excess > self.tol || excess.is_nan() {
            self.failures += 1;
        }
    }

    fn line(self) -> SuiteLine {
        let worst = if self.trials == 0 { 0.0 } else { self.worst };
        SuiteLine { suite: self.suite, trials: self.trials, worst_excess: worst, tolerance: self.tol, failures: self.failures, pass: self.failures == 0 }
    }
}

fn kinds() -> [FDivKind; 4] {
    [FDivKind::SD, FDivKind::HD, FDivKind::KL, FDivKind::EpsD(0.5)]
}

fn dpi_suite<P: Masses>(kind: FDivKind, trials: usize, rng: &mut ChaCha8Rng) -> SuiteLine {
    let mut t = Tally::new(format!("data-processing {} ({})", kind, P::LABEL), P::TOL);
    for _ in 0..trials {
        let n = rng.gen_range(1..=MAX_UNIVERSE);
        let m = rng.gen_range(1..=MAX_UNIVERSE);
        let (m1, m2) = (random_dist::<P>(rng, n), random_dist::<P>(rng, n));
        let k = random_kernel::<P>(rng, n, m);
        let (b1, b2) = (dist_bind(&m1, |v| k[*v as usize].clone()), dist_bind(&m2, |v| k[*v as usize].clone()));
        t.le(fdiv(kind, &b1, &b2), fdiv(kind, &m1, &m2));
    }
    t.line()
}

fn composition_suite<P: Masses>(f1: FDivKind, f2: FDivKind, trials: usize, rng: &mut ChaCha8Rng) -> SuiteLine {
    let f3 = composable(f1, f2).expect("composable pair");
    let mut t = Tally::new(format!("composability ({}, {}) -> {} ({})", f1, f2, f3, P::LABEL), P::TOL);
    for _ in 0..trials {
        let n = rng.gen_range(1..=MAX_UNIVERSE);
        let m = rng.gen_range(1..=MAX_UNIVERSE);
        let (m1, m2) = (random_dist::<P>(rng, n), random_dist::<P>(rng, n));
        let (k1, k2) = (random_kernel::<P>(rng, n, m), random_kernel::<P>(rng, n, m));
        let b1 = dist_bind(&m1, |v| k1[*v as usize].clone());
        let b2 = dist_bind(&m2, |v| k2[*v as usize].clone());
        let body = (0..n as usize).map(|v| fdiv(f2, &k1[v], &k2[v])).fold(0.0, f64::max);
        t.le(fdiv(f3, &b1, &b2), fdiv(f1, &m1, &m2) + body);
    }
    t.line()
}

fn max_abs_diff<P: Scalar>(a: &D<P>, b: &D<P>) -> f64 {
    crate::dist::align(a, b).into_iter().map(|(_, x, y)| (x - y).to_f64_lossy().abs()).fold(0.0, f64::max)
}

fn monad_suite<P: Masses>(trials: usize, rng: &mut ChaCha8Rng) -> SuiteLine {
    let mut t = Tally::new(format!("monad laws ({})", P::LABEL), if P::EXACT { 0.0 } else { EXACT_TOL });
    for _ in 0..trials {
        let n = rng.gen_range(1..=MAX_UNIVERSE);
        let mu = random_dist::<P>(rng, n);
        let k1 = random_kernel::<P>(rng, n, n);
        let k2 = random_kernel::<P>(rng, n, n);
        let v = rng.gen_range(0..n);
        let left = dist_bind(&dist_unit::<u32, P>(v), |x| k1[*x as usize].clone());
        let right = dist_bind(&mu, |x| dist_unit(*x));
        let assoc_l = dist_bind(&dist_bind(&mu, |x| k1[*x as usize].clone()), |y| k2[*y as usize].clone());
        let assoc_r = dist_bind(&mu, |x| dist_bind(&k1[*x as usize], |y| k2[*y as usize].clone()));
        let worst = max_abs_diff(&left, &k1[v as usize]).max(max_abs_diff(&right, &mu)).max(max_abs_diff(&assoc_l, &assoc_r));
        let exact_ok = !P::EXACT || (left == k1[v as usize] && right == mu && assoc_l == assoc_r);
        t.le(if exact_ok { worst } else { f64::INFINITY }, 0.0);
    }
    t.line()
}

/// Searches for witnesses of an `(f, delta)`-lifting of `rel` between `m1` and `m2`.
///
/// The left witness splits each row mass `m1(a)` over the related columns, the right
/// witness splits each column mass `m2(b)` over the related rows, in steps of `1/steps`.
/// For relations where every point has one partner the search is exhaustive.
pub fn witness_search(kind: FDivKind, delta: f64, m1: &[f64], m2: &[f64], rel: &dyn Fn(usize, usize) -> bool, steps: u32) -> bool {
    let n = m1.len();
    let row_opts: Vec<Vec<Vec<(usize, usize, f64)>>> = (0..n).map(|a| splits(m1[a], (0..n).filter(|&b| rel(a, b)).map(|b| (a, b)).collect(), steps)).collect();
    let col_opts: Vec<Vec<Vec<(usize, usize, f64)>>> = (0..n).map(|b| splits(m2[b], (0..n).filter(|&a| rel(a, b)).map(|a| (a, b)).collect(), steps)).collect();
    if row_opts.iter().chain(&col_opts).any(|o| o.is_empty()) {
        return false;
    }
    let lefts = product(&row_opts);
    let rights = product(&col_opts);
    lefts.iter().any(|l| rights.iter().any(|r| fdiv(kind, l, r) <= delta + EXACT_TOL))
}

/// All ways to spread `mass` over `cells` in multiples of `mass / steps`.
fn splits(mass: f64, cells: Vec<(usize, usize)>, steps: u32) -> Vec<Vec<(usize, usize, f64)>> {
    if mass == 0.0 {
        return vec![vec![]];
    }
    if cells.is_empty() {
        return vec![];
    }
    let mut out = Vec::new();
    let mut parts = vec![0u32; cells.len()];
    fn rec(i: usize, left: u32, parts: &mut Vec<u32>, cells: &[(usize, usize)], mass: f64, steps: u32, out: &mut Vec<Vec<(usize, usize, f64)>>) {
        if i + 1 == parts.len() {
            parts[i] = left;
            out.push(cells.iter().zip(parts.iter()).filter(|(_, &k)| k > 0).map(|(&(a, b), &k)| (a, b, mass * k as f64 / steps as f64)).collect());
            return;
        }
        for k in 0..=left {
            parts[i] = k;
            rec(i + 1, left - k, parts, cells, mass, steps, out);
        }
    }
    rec(0, steps, &mut parts, &cells, mass, steps, &mut out);
    out
}

fn product(opts: &[Vec<Vec<(usize, usize, f64)>>]) -> Vec<Dist<(usize, usize), f64>> {
    let mut acc: Vec<Vec<(usize, usize, f64)>> = vec![vec![]];
    for o in opts {
        acc = acc.iter().flat_map(|prefix| o.iter().map(move |x| [prefix.as_slice(), x.as_slice()].concat())).collect();
    }
    acc.into_iter().map(|cells| Dist::normalized(cells.into_iter().map(|(a, b, p)| ((a, b), p))).expect("positive mass")).collect()
}

fn lifting_suite(trials: usize, rng: &mut ChaCha8Rng) -> SuiteLine {
    let mut t = Tally::new("diagonal lifting vs witness search (float)".into(), 0.0);
    let diag = |a: usize, b: usize| a == b;
    for i in 0..trials {
        let kind = kinds()[i % 4];
        let n = rng.gen_range(1..=3u32);
        let (m1, m2) = (random_dist::<f64>(rng, n), random_dist::<f64>(rng, n));
        let dense = |d: &D<f64>| (0..n).map(|v| d.mass(&v)).collect::<Vec<f64>>();
        let d = fdiv(kind, &m1, &m2);
        let delta = if d.is_finite() { d * rng.gen_range(0.0..2.0) } else { rng.gen_range(0.0..3.0) };
        if d.is_finite() && (delta - d).abs() < 1e-9 {
            continue;
        }
        let fast = check_diagonal_lifting(kind, delta, &m1, &m2);
        let slow = witness_search(kind, delta, &dense(&m1), &dense(&m2), &diag, 4);
        t.le(if fast == slow { 0.0 } else { 1.0 }, 0.0);
    }
    t.line()
}

fn asymmetry_line(rng: &mut ChaCha8Rng) -> SuiteLine {
    let mut t = Tally::new("eps-distance asymmetry witness".into(), 0.0);
    let e = FDivKind::EpsD(0.5);
    let found = (0..1000).any(|_| {
        let (a, b) = (random_dist::<f64>(rng, 3), random_dist::<f64>(rng, 3));
        (fdiv(e, &a, &b) - fdiv(e, &b, &a)).abs() > 1e-6
    });
    t.le(if found { 0.0 } else { 1.0 }, 0.0);
    t.line()
}

pub(super) fn dpi_lines(trials: usize, seed: u64) -> Vec<SuiteLine> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kinds().into_iter().map(|k| dpi_suite::<f64>(k, trials, &mut rng)).collect()
}

/// Runs every suite with `trials` instances each; reproducible for a given seed.
pub fn check_composition_and_dpi(trials: usize, seed: u64) -> SuiteReport {
    let trials = trials.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for k in kinds() {
        lines.push(dpi_suite::<BigRational>(k, trials, &mut rng));
        lines.push(dpi_suite::<f64>(k, trials, &mut rng));
    }
    let pairs = [
        (FDivKind::SD, FDivKind::SD),
        (FDivKind::HD, FDivKind::HD),
        (FDivKind::KL, FDivKind::KL),
        (FDivKind::EpsD(0.5), FDivKind::EpsD(0.7)),
    ];
    for (f1, f2) in pairs {
        lines.push(composition_suite::<BigRational>(f1, f2, trials, &mut rng));
        lines.push(composition_suite::<f64>(f1, f2, trials, &mut rng));
    }
    lines.push(monad_suite::<BigRational>(trials, &mut rng));
    lines.push(monad_suite::<f64>(trials, &mut rng));
    lines.push(lifting_suite(trials.min(200).max(1), &mut rng));
    lines.push(asymmetry_line(&mut rng));
    let pass = lines.iter().all(|l| l.pass);
    SuiteReport { seed, lines, pass }
}
