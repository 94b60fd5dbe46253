use std::cell::Cell as Counter;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use privinfer::corpus::{fixtures, run_fixture};
use privinfer::dist::{discretize, fdiv, sym_grid_divergence, Dist, FDivKind, Grid, SymDist};
use privinfer::dpverify::VerifyOptions;
use privinfer::eval::{eval, EvalConfig, EvalErrorKind, Valuation, Value};
use privinfer::infer::{alg_inf, Family};
use privinfer::mech::{exp_mech, laplace_mech, Window};
use privinfer::reltype::replay_program;
use privinfer::syntax::{parse, pretty, Expr};
use privinfer::types::{typecheck, SimpleType, TypeEnv};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn leak(src: &str) -> &'static Expr {
    Box::leak(Box::new(parse(src).unwrap_or_else(|e| panic!("{}\n{}", e, src))))
}

// random monadic programs over booleans

#[derive(Debug, Clone)]
enum B {
    Lit(bool),
    Var(usize),
    Not(Box<B>),
    And(Box<B>, Box<B>),
    Or(Box<B>, Box<B>),
    Eq(Box<B>, Box<B>),
}

#[derive(Debug, Clone)]
enum M {
    Ret(B),
    Flip(u8),
    Bind(Box<M>, Box<M>),
    If(B, Box<M>, Box<M>),
    Observe(Box<M>, Box<M>),
}

fn boolean() -> impl Strategy<Value = B> {
    let leaf = prop_oneof![any::<bool>().prop_map(B::Lit), (0usize..4).prop_map(B::Var)];
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|b| B::Not(Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| B::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| B::Or(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| B::Eq(Box::new(a), Box::new(b))),
        ]
    })
}

fn monadic() -> impl Strategy<Value = M> {
    let leaf = prop_oneof![boolean().prop_map(M::Ret), (0u8..=10).prop_map(M::Flip)];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| M::Bind(Box::new(a), Box::new(b))),
            (boolean(), inner.clone(), inner.clone()).prop_map(|(c, a, b)| M::If(c, Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(p, m)| M::Observe(Box::new(p), Box::new(m))),
        ]
    })
}

/// Scope entries are either bound names or closed boolean expressions substituted in place.
fn show_b(b: &B, scope: &[String]) -> String {
    match b {
        B::Lit(v) => v.to_string(),
        B::Var(i) if scope.is_empty() => "true".into(),
        B::Var(i) => scope[scope.len() - 1 - i % scope.len()].clone(),
        B::Not(a) => format!("(not {})", show_b(a, scope)),
        B::And(a, c) => format!("({} && {})", show_b(a, scope), show_b(c, scope)),
        B::Or(a, c) => format!("({} || {})", show_b(a, scope), show_b(c, scope)),
        B::Eq(a, c) => format!("({} = {})", show_b(a, scope), show_b(c, scope)),
    }
}

fn show_m(m: &M, scope: &mut Vec<String>, fresh: &mut usize) -> String {
    match m {
        M::Ret(b) => format!("return {}", show_b(b, scope)),
        M::Flip(p) => format!("ran bernoulli({})", *p as f64 / 10.0),
        M::Bind(a, k) => {
            let head = show_m(a, scope, fresh);
            let x = bind_name(fresh);
            scope.push(x.clone());
            let body = show_m(k, scope, fresh);
            scope.pop();
            format!("(mlet {} = {} in {})", x, head, body)
        }
        M::If(c, a, b) => format!("(if {} then {} else {})", show_b(c, scope), show_m(a, scope, fresh), show_m(b, scope, fresh)),
        M::Observe(p, prior) => {
            let prior = show_m(prior, scope, fresh);
            let x = bind_name(fresh);
            scope.push(x.clone());
            let pred = show_m(p, scope, fresh);
            scope.pop();
            format!("(observe {} => {} in {})", x, pred, prior)
        }
    }
}

fn bind_name(fresh: &mut usize) -> String {
    *fresh += 1;
    format!("x{}", fresh)
}

fn render(m: &M) -> String {
    show_m(m, &mut Vec::new(), &mut 0)
}

type QDist = Dist<Value<'static, BigRational>, BigRational>;

/// `None` when some observation has probability zero.
fn run_q(src: &str) -> Option<QDist> {
    match eval(&Valuation::new(), leak(src), &EvalConfig::default()) {
        Ok(Value::Dist(d)) => Some(d.dist().unwrap().clone()),
        Ok(other) => panic!("{} evaluated to {}", src, other),
        Err(e) if e.kind == EvalErrorKind::ZeroMassObservation => None,
        Err(e) => panic!("{}: {}", src, e),
    }
}

fn run_f(src: &str) -> Option<Dist<Value<'static, f64>, f64>> {
    match eval(&Valuation::new(), leak(src), &EvalConfig::default()) {
        Ok(Value::Dist(d)) => Some(d.dist().unwrap().clone()),
        Ok(other) => panic!("{} evaluated to {}", src, other),
        Err(e) if e.kind == EvalErrorKind::ZeroMassObservation => None,
        Err(e) => panic!("{}: {}", src, e),
    }
}

proptest! {
    #![proptest_config(Config::with_cases(300))]

    #[test]
    fn evaluated_distributions_keep_their_mass(m in monadic()) {
        let src = render(&m);
        let (q, f) = (run_q(&src), run_f(&src));
        prop_assert_eq!(q.is_some(), f.is_some());
        if let (Some(q), Some(f)) = (q, f) {
            prop_assert!(q.total().is_one());
            prop_assert!((f.total() - 1.0).abs() <= 1e-12, "{}", f.total());
        }
    }

    #[test]
    fn evaluation_is_deterministic(m in monadic()) {
        let src = render(&m);
        prop_assert_eq!(run_q(&src), run_q(&src));
        let (a, b) = (run_f(&src), run_f(&src));
        prop_assert_eq!(format!("{:?}", a), format!("{:?}", b));
    }

    #[test]
    fn right_unit(m in monadic()) {
        let src = render(&m);
        prop_assert_eq!(run_q(&format!("mlet y = {} in return y", src)), run_q(&src));
    }

    #[test]
    fn left_unit(b in boolean(), m in monadic()) {
        let v = show_b(&b, &[]);
        let bound = show_m(&m, &mut vec!["y".into()], &mut 0);
        let substituted = show_m(&m, &mut vec![v.clone()], &mut 0);
        prop_assert_eq!(run_q(&format!("mlet y = return {} in {}", v, bound)), run_q(&substituted));
    }

    #[test]
    fn bind_is_associative(m1 in monadic(), m2 in monadic(), m3 in monadic()) {
        let mut fresh = 100;
        let head = show_m(&m1, &mut vec![], &mut fresh);
        let mid = show_m(&m2, &mut vec!["b".into()], &mut fresh);
        let tail = show_m(&m3, &mut vec!["a".into()], &mut fresh);
        let left = format!("mlet a = (mlet b = {} in {}) in {}", head, mid, tail);
        let right = format!("mlet b = {} in (mlet a = {} in {})", head, mid, tail);
        prop_assert_eq!(run_q(&left), run_q(&right));
    }
}

// typecheck soundness: random terms over typed free variables, evaluated under fuzzed valuations

#[derive(Debug, Clone)]
enum T {
    Num(i8),
    Bool(bool),
    Var(u8),
    Nil,
    Un(bool, Box<T>),
    Bin(u8, Box<T>, Box<T>),
    If(Box<T>, Box<T>, Box<T>),
    Cons(Box<T>, Box<T>),
    Prim(u8, Box<T>),
    Ret(Box<T>),
    Flip(Box<T>),
    MLet(Box<T>, Box<T>),
    Let(Box<T>, Box<T>),
    Lam(u8, Box<T>, Box<T>),
    Match(Box<T>, Box<T>, Box<T>),
}

const OPS: [&str; 12] = ["+", "-", "*", "/", "=", "<>", "<", "<=", ">", ">=", "&&", "||"];
const PRIMS: [&str; 5] = ["sqrt", "abs", "length", "exp", "ln"];
const TYPES: [&str; 4] = ["real", "bool", "list real", "[0,1]"];
const FREE: [&str; 5] = ["a", "b", "n", "l", "x"];

fn term() -> impl Strategy<Value = T> {
    let leaf = prop_oneof![
        (-3i8..8).prop_map(T::Num),
        any::<bool>().prop_map(T::Bool),
        (0u8..5).prop_map(T::Var),
        Just(T::Nil),
    ];
    leaf.prop_recursive(4, 24, 3, |t| {
        let b = |t: T| Box::new(t);
        prop_oneof![
            (any::<bool>(), t.clone()).prop_map(move |(neg, x)| T::Un(neg, b(x))),
            (0u8..12, t.clone(), t.clone()).prop_map(move |(o, x, y)| T::Bin(o, b(x), b(y))),
            (t.clone(), t.clone(), t.clone()).prop_map(move |(c, x, y)| T::If(b(c), b(x), b(y))),
            (t.clone(), t.clone()).prop_map(move |(x, y)| T::Cons(b(x), b(y))),
            (0u8..5, t.clone()).prop_map(move |(p, x)| T::Prim(p, b(x))),
            t.clone().prop_map(move |x| T::Ret(b(x))),
            t.clone().prop_map(move |x| T::Flip(b(x))),
            (t.clone(), t.clone()).prop_map(move |(x, y)| T::MLet(b(x), b(y))),
            (t.clone(), t.clone()).prop_map(move |(x, y)| T::Let(b(x), b(y))),
            (0u8..4, t.clone(), t.clone()).prop_map(move |(ty, x, y)| T::Lam(ty, b(x), b(y))),
            (t.clone(), t.clone(), t).prop_map(move |(s, x, y)| T::Match(b(s), b(x), b(y))),
        ]
    })
}

fn show_t(t: &T) -> String {
    match t {
        T::Num(n) if *n < 0 => format!("(0 - {})", -(*n as i32) as f64 / 2.0),
        T::Num(n) => format!("{}", *n as f64 / 2.0),
        T::Bool(v) => v.to_string(),
        T::Var(i) => FREE[*i as usize].into(),
        T::Nil => "[]".into(),
        T::Un(true, x) => format!("(0 - {})", show_t(x)),
        T::Un(false, x) => format!("(not {})", show_t(x)),
        T::Bin(o, x, y) => format!("({} {} {})", show_t(x), OPS[*o as usize], show_t(y)),
        T::If(c, x, y) => format!("(if {} then {} else {})", show_t(c), show_t(x), show_t(y)),
        T::Cons(x, y) => format!("({} :: {})", show_t(x), show_t(y)),
        T::Prim(p, x) => format!("{}({})", PRIMS[*p as usize], show_t(x)),
        T::Ret(x) => format!("(return {})", show_t(x)),
        T::Flip(x) => format!("(ran bernoulli({}))", show_t(x)),
        T::MLet(x, y) => format!("(mlet x = {} in {})", show_t(x), show_t(y)),
        T::Let(x, y) => format!("(let x = {} in {})", show_t(x), show_t(y)),
        T::Lam(ty, x, y) => format!("((fun (x: {}) -> {}) {})", TYPES[*ty as usize], show_t(x), show_t(y)),
        T::Match(s, x, y) => format!("(match {} with | [] -> {} | x :: xs -> {})", show_t(s), show_t(x), show_t(y)),
    }
}

fn gamma() -> TypeEnv {
    TypeEnv::new()
        .with("a", SimpleType::Real)
        .with("b", SimpleType::Bool)
        .with("n", SimpleType::UnitInterval)
        .with("l", SimpleType::list(SimpleType::Real))
}

fn valuation(a: f64, b: bool, n: f64, l: &[f64]) -> Valuation<'static, f64> {
    let mut v = Valuation::new();
    v.insert("a".into(), Value::num(a));
    v.insert("b".into(), Value::Bool(b));
    v.insert("n".into(), Value::num(n));
    v.insert("l".into(), Value::list(l.iter().map(|x| Value::num(*x)).collect()));
    v
}

#[test]
fn well_typed_terms_have_no_dynamic_type_errors() {
    let mut runner = TestRunner::new(Config { cases: 4000, ..Config::default() });
    let well_typed = Counter::new(0usize);
    let strategy = (term(), -4.0f64..4.0, any::<bool>(), 0.0f64..=1.0, prop::collection::vec(-4.0f64..4.0, 0..4));
    runner
        .run(&strategy, |(t, a, b, n, l)| {
            let src = show_t(&t);
            let e = leak(&src);
            let ty = typecheck(&gamma(), e);
            prop_assert_eq!(&ty, &typecheck(&gamma(), e));
            if ty.is_err() {
                return Ok(());
            }
            well_typed.set(well_typed.get() + 1);
            let cfg = EvalConfig { fuel: 10_000, ..EvalConfig::default() };
            if let Err(err) = eval(&valuation(a, b, n, &l), e, &cfg) {
                prop_assert!(
                    !matches!(err.kind, EvalErrorKind::Type(_) | EvalErrorKind::Unbound(_) | EvalErrorKind::MatchFailure(_)),
                    "{} : {} failed with {}",
                    src,
                    ty.unwrap(),
                    err
                );
            }
            Ok(())
        })
        .unwrap();
    assert!(well_typed.get() >= 400, "only {} well-typed terms", well_typed.get());
}

// f-divergences

fn kinds() -> Vec<FDivKind> {
    vec![FDivKind::SD, FDivKind::HD, FDivKind::KL, FDivKind::EpsD(0.0), FDivKind::EpsD(0.7)]
}

fn dist6() -> impl Strategy<Value = Dist<u8, f64>> {
    prop::collection::vec(0u32..5, 1..=6).prop_filter_map("all zero", |w| {
        let pairs: Vec<(u8, f64)> = w.iter().enumerate().map(|(i, x)| (i as u8, *x as f64)).collect();
        Dist::normalized(pairs).ok()
    })
}

fn kernel() -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0u32..4, 3).prop_filter("all zero", |r| r.iter().any(|x| *x > 0)), 6)
}

fn apply(k: &[Vec<u32>], v: &u8) -> Dist<u8, f64> {
    Dist::normalized(k[*v as usize].iter().enumerate().map(|(i, w)| (i as u8, *w as f64))).unwrap()
}

proptest! {
    #![proptest_config(Config::with_cases(300))]

    #[test]
    fn divergences_are_nonnegative_and_vanish_on_equal_inputs(m1 in dist6(), m2 in dist6()) {
        for k in kinds() {
            let d = fdiv(k, &m1, &m2);
            prop_assert!(!d.is_nan() && d >= 0.0, "{} {}", k, d);
            prop_assert_eq!(fdiv(k, &m1, &m1), 0.0);
        }
        prop_assert!((fdiv(FDivKind::SD, &m1, &m2) - fdiv(FDivKind::SD, &m2, &m1)).abs() < 1e-15);
    }

    #[test]
    fn kernels_do_not_increase_divergence(m1 in dist6(), m2 in dist6(), k in kernel()) {
        let (p1, p2) = (m1.bind(|v| apply(&k, v)), m2.bind(|v| apply(&k, v)));
        for kind in kinds() {
            let (before, after) = (fdiv(kind, &m1, &m2), fdiv(kind, &p1, &p2));
            prop_assert!(after <= before + 1e-12, "{}: {} > {}", kind, after, before);
        }
    }
}

#[test]
fn grid_refinement_converges_linearly() {
    let cases = [
        (FDivKind::HD, SymDist::Beta(2.0, 3.0), SymDist::Beta(3.0, 2.0)),
        (FDivKind::SD, SymDist::Beta(2.0, 5.0), SymDist::Beta(4.0, 4.0)),
        (FDivKind::HD, SymDist::Normal(0.0, 1.0), SymDist::Normal(0.5, 1.0)),
        (FDivKind::SD, SymDist::Normal(0.0, 1.0), SymDist::Normal(1.0, 2.0)),
    ];
    for (kind, s1, s2) in cases {
        let at = |n: usize| sym_grid_divergence(kind, &s1, &s2, n, 50).unwrap();
        let ns = [50usize, 100, 200, 400, 800, 1600];
        let gaps: Vec<f64> = ns.iter().map(|&n| (at(n) - at(2 * n)).abs()).collect();
        let c = ns.iter().zip(&gaps).map(|(&n, g)| n as f64 * g).fold(0.0, f64::max);
        eprintln!("{} {} vs {}: C = {:.3e}, gaps {:?}", kind, s1, s2, c, gaps);
        for (&n, g) in ns.iter().zip(&gaps) {
            assert!(*g <= c / n as f64 + 1e-15);
        }
        assert!(c < 1.0, "{}", c);
        assert!(gaps.last().unwrap() <= &gaps[0], "{:?}", gaps);
    }
}

// mechanisms

proptest! {
    #![proptest_config(Config::with_cases(200))]

    #[test]
    fn exp_mech_is_normalized_and_shift_invariant(
        scores in prop::collection::vec(-5.0f64..5.0, 1..8),
        eps in 0.05f64..4.0,
        c in -50.0f64..50.0,
    ) {
        let scored: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        let d = exp_mech(&eps, scored.clone()).unwrap();
        prop_assert!((d.total() - 1.0).abs() <= 1e-12);
        let shifted = exp_mech(&eps, scored.iter().map(|(i, s)| (*i, s + c)).collect()).unwrap();
        for (i, _) in &scored {
            prop_assert!((d.mass(i) - shifted.mass(i)).abs() <= 1e-12);
        }
    }

    #[test]
    fn exp_mech_is_exact_on_rationals(scores in prop::collection::vec(0i64..4, 1..6)) {
        let eps = BigRational::from_integer(2.into());
        let d = exp_mech(&eps, scores.iter().map(|s| BigRational::from_integer((*s).into())).enumerate().collect()).unwrap();
        let off = (d.total() - BigRational::one()).to_f64().unwrap();
        prop_assert!(off.abs() <= 1e-12, "{}", off);
    }

    #[test]
    fn laplace_translation_is_a_cell_shift(k in -40i64..40, x0 in -20i64..20, cpu in 1u32..12, eps in 0.2f64..3.0) {
        let x = x0 as f64 / cpu as f64;
        let y = (x0 + k) as f64 / cpu as f64;
        let a = laplace_mech(&eps, &x, &Window::laplace(x, eps, cpu)).unwrap();
        let b = laplace_mech(&eps, &y, &Window::laplace(y, eps, cpu)).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for ((c1, m1), (c2, m2)) in a.pairs().iter().zip(b.pairs()) {
            prop_assert!((c2.rep - c1.rep - (y - x)).abs() < 1e-9);
            prop_assert!((m1 - m2).abs() < 1e-12);
        }
    }

    #[test]
    fn post_processing_mechanism_outputs(x in -3.0f64..3.0, eps in 0.2f64..2.0, cuts in prop::collection::vec(-6.0f64..6.0, 1..4), flip in 0.0f64..1.0) {
        let cpu = 8;
        let w = Window::covering(x - 1.0 - 12.0 / eps, x + 12.0 / eps, cpu);
        let (m1, m2) = (laplace_mech(&eps, &x, &w).unwrap(), laplace_mech(&eps, &(x - 1.0), &w).unwrap());
        // a randomized kernel: bucket the output, then flip the bucket parity with some probability
        let post = |c: &privinfer::dist::Cell<f64>| {
            let bucket = cuts.iter().filter(|t| c.rep > **t).count() as u8;
            Dist::from_pairs(vec![(bucket, 1.0 - flip), (bucket ^ 1, flip)]).unwrap()
        };
        let (p1, p2) = (m1.bind(post), m2.bind(post));
        for kind in [FDivKind::EpsD(eps), FDivKind::EpsD(eps / 2.0), FDivKind::SD, FDivKind::HD] {
            prop_assert!(fdiv(kind, &p1, &p2) <= fdiv(kind, &m1, &m2) + 1e-12);
        }
    }
}

// conjugate inference

fn beta_bernoulli(data: &[bool], a: u32, b: u32) -> String {
    data.iter().fold(format!("ran beta({}, {})", a, b), |prior, d| {
        format!("(observe r => (mlet z = ran bernoulli(r) in return (z = {})) in {})", d, prior)
    })
}

fn posterior(src: &str, cfg: &EvalConfig) -> Value<'static, f64> {
    eval(&Valuation::new(), leak(src), cfg).unwrap_or_else(|e| panic!("{}: {}", src, e))
}

fn pmf(v: &Value<'static, f64>) -> Vec<(String, f64)> {
    v.as_dist().unwrap().dist().unwrap().iter().map(|(x, p)| (x.to_string(), *p)).collect()
}

proptest! {
    #![proptest_config(Config::with_cases(40))]

    #[test]
    fn observation_order_does_not_matter(data in prop::collection::vec(any::<bool>(), 1..6), a in 1u32..4, b in 1u32..4) {
        let mut rev = data.clone();
        rev.reverse();
        for conjugate in [true, false] {
            let cfg = EvalConfig { conjugate, grid_n: 400, ..EvalConfig::default() };
            let (x, y) = (pmf(&posterior(&beta_bernoulli(&data, a, b), &cfg)), pmf(&posterior(&beta_bernoulli(&rev, a, b), &cfg)));
            prop_assert_eq!(x.len(), y.len());
            for ((v1, p1), (v2, p2)) in x.iter().zip(&y) {
                prop_assert_eq!(v1, v2);
                prop_assert!((p1 - p2).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn fitted_posterior_ignores_observation_order(data in prop::collection::vec(any::<bool>(), 1..6)) {
        let mut rev = data.clone();
        rev.reverse();
        let cfg = EvalConfig { conjugate: false, grid_n: 400, ..EvalConfig::default() };
        let fit = |d: &[bool]| posterior(&format!("infer {}", beta_bernoulli(d, 2, 2)), &cfg).as_sym().cloned().unwrap();
        match (fit(&data), fit(&rev)) {
            (SymDist::Beta(a1, b1), SymDist::Beta(a2, b2)) => {
                prop_assert!((a1 - a2).abs() < 1e-9 && (b1 - b2).abs() < 1e-9, "{} {} / {} {}", a1, b1, a2, b2);
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn fast_and_grid_paths_agree(data in prop::collection::vec(any::<bool>(), 1..5), a in 1u32..4, b in 1u32..4) {
        let src = format!("infer {}", beta_bernoulli(&data, a, b));
        let fast = posterior(&src, &EvalConfig::default()).as_sym().cloned().unwrap();
        let grid = posterior(&src, &EvalConfig { conjugate: false, ..EvalConfig::default() }).as_sym().cloned().unwrap();
        match (fast, grid) {
            (SymDist::Beta(a1, b1), SymDist::Beta(a2, b2)) => {
                prop_assert!((a1 - a2).abs() < 2e-2 && (b1 - b2).abs() < 2e-2, "{} {} / {} {}", a1, b1, a2, b2);
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }
}

#[test]
fn fitted_conjugate_posteriors_round_trip() {
    // posteriors reached by the conjugate fixtures at their default parameters
    let cases = [
        (SymDist::Beta(3.0f64, 2.0), Grid::Unit { n: 1000 }, Family::Beta),
        (SymDist::Beta(1.0, 4.0), Grid::Unit { n: 1000 }, Family::Beta),
        (SymDist::Beta(6.0, 5.0), Grid::Unit { n: 1000 }, Family::Beta),
        (SymDist::Normal(0.5, 0.5), Grid::normal_lattice(0.5, 0.5, 400), Family::Normal),
        (SymDist::Normal(0.75, 0.25), Grid::normal_lattice(0.75, 0.25, 400), Family::Normal),
        (SymDist::Dirichlet(vec![2.0, 1.0, 3.0]), Grid::Simplex { n: 200 }, Family::Dirichlet),
    ];
    for (s, grid, family) in cases {
        let mu = discretize(&s, &grid).unwrap();
        let fitted = alg_inf(&mu, Some(family)).unwrap();
        let back = discretize(&fitted, &grid).unwrap();
        let worst = mu.iter().map(|(v, p)| (back.mass(v) - p).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-6, "{} fitted as {}: pointwise gap {:.3e}", s, fitted, worst);
    }
}

// relational checking and the oracle

#[test]
fn corpus_derivations_replay() {
    for f in fixtures() {
        let prog = f.parse_program().unwrap();
        let rt = f.parse_annotation().unwrap();
        let r = run_fixture(&f, &VerifyOptions::default()).unwrap();
        let d = r.derivation.unwrap_or_else(|| panic!("{} has no derivation", f.name));
        let n = replay_program(&prog, &rt, &d).unwrap_or_else(|e| panic!("{}: {}", f.name, e));
        assert!(n > 0, "{}", f.name);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, serde_json::to_string(&r_again(&f)).unwrap(), "{}", f.name);
    }
}

fn r_again(f: &privinfer::corpus::Fixture) -> privinfer::reltype::Derivation {
    privinfer::reltype::relcheck_program(&f.parse_program().unwrap(), &f.parse_annotation().unwrap()).unwrap()
}

#[test]
fn reports_are_deterministic() {
    for f in fixtures() {
        let a = run_fixture(&f, &VerifyOptions::default()).unwrap();
        let b = run_fixture(&f, &VerifyOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap(), "{}", f.name);
    }
}

#[test]
fn corpus_programs_round_trip_through_the_printer() {
    for f in fixtures() {
        let e = f.parse_program().unwrap();
        let again = parse(&pretty(&e)).unwrap();
        assert_eq!(e, again, "{}", f.name);
    }
}
