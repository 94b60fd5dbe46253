//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use privinfer::corpus::{self, run_fixture};
use privinfer::dist::{align, discretize, fdiv, Dist, FDivKind, Grid, SymDist};
use privinfer::dpverify::{check_composition_and_dpi, check_lemma_certificates, check_program, run_program, AdjacencyRel, InputSpace, VerifyOptions};
use privinfer::eval::{EvalConfig, Evaluator, Valuation, Value};
use privinfer::mech::{self, Window};
use privinfer::reltype::term::named_constant;
use privinfer::syntax::parse;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn line(n: u32, title: &str, v: &Verdict, t: Duration) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {}: {} {} ({}; {:.1}s)", n, if v.pass { "PASS" } else { "FAIL" }, title, v.detail, t.as_secs_f64());
}

/// Largest pointwise gap between an observed grid posterior and the discretized closed form.
fn posterior_gap(src: &str, closed: &SymDist<f64>, grid: &Grid, cfg: &EvalConfig) -> f64 {
    let e = parse(src).unwrap_or_else(|err| panic!("{}: {}", src, err));
    let ev = Evaluator::new(cfg.clone());
    let v = ev.eval_closed(&Valuation::new(), &e).unwrap_or_else(|err| panic!("{}: {}", src, err));
    let Value::Dist(d) = v else { panic!("{} is not a distribution", src) };
    assert!(d.source().is_none(), "{}: posterior came from a closed-form update", src);
    let observed = d.dist().unwrap();
    let want: Dist<Value<'_, f64>, f64> = discretize(closed, grid).unwrap().map(Value::from_grid_point);
    assert_eq!(observed.len(), want.len(), "{}: support sizes differ", src);
    align(observed, &want).into_iter().map(|(_, p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn bernoulli_observes(data: &[bool], prior: &str) -> String {
    data.iter().fold(prior.to_string(), |acc, x| format!("observe r => (mlet z = ran bernoulli(r) in return ({} = z)) in ({})", x, acc))
}

fn conjugacy() -> Verdict {
    const TOL: f64 = 1e-6;
    let cfg = EvalConfig { conjugate: false, grid_n: 10_000, simplex_n: 200, ..EvalConfig::default() };
    let unit = Grid::Unit { n: 10_000 };
    let first = posterior_gap(&bernoulli_observes(&[true], "ran beta(1, 1)"), &SymDist::Beta(2.0, 1.0), &unit, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut worst_beta: f64 = 0.0;
    for _ in 0..20 {
        let a = rng.gen_range(5..=50) as f64 / 10.0;
        let b = rng.gen_range(5..=50) as f64 / 10.0;
        let data: Vec<bool> = (0..rng.gen_range(1..=6)).map(|_| rng.gen()).collect();
        let t = data.iter().filter(|x| **x).count() as f64;
        let closed = SymDist::Beta(a + t, b + data.len() as f64 - t);
        worst_beta = worst_beta.max(posterior_gap(&bernoulli_observes(&data, &format!("ran beta({}, {})", a, b)), &closed, &unit, &cfg));
    }
    let simplex = Grid::Simplex { n: 200 };
    let mut worst_dir: f64 = 0.0;
    for _ in 0..10 {
        let data: Vec<u32> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(0..3)).collect();
        let mut alpha = vec![1.0; 3];
        let src = data.iter().fold("ran dirichlet(1, 1, 1)".to_string(), |acc, c| {
            alpha[*c as usize] += 1.0;
            format!("observe (fun r s -> mlet z = ran multinomial(r, s) in return (z = {})) ({})", c, acc)
        });
        worst_dir = worst_dir.max(posterior_gap(&src, &SymDist::Dirichlet(alpha), &simplex, &cfg));
    }
    verdict(
        first <= TOL && worst_beta <= TOL && worst_dir <= TOL,
        format!("Beta(1,1)+true vs Beta(2,1) gap {:.1e}, 20 beta cases {:.1e}, 10 Dirichlet cases {:.1e}, tolerance {:.0e}", first, worst_beta, worst_dir, TOL),
    )
}

fn lemmas() -> Verdict {
    let r = check_lemma_certificates(10_000, 200);
    let failing: Vec<String> = r.failures().map(|c| format!("{} {} = {:.5} > {:.5}", c.lemma, c.instance, c.measured, c.bound)).collect();
    let all = r.checks.iter().all(|c| c.pass);
    let detail = if failing.is_empty() {
        format!("{} checks within bounds", r.checks.len())
    } else {
        format!("{} of {} checks exceed their bound: {}", failing.len(), r.checks.len(), failing.join(", "))
    };
    verdict(all, detail)
}

fn exp_mech_exactness() -> Verdict {
    let mut worst_div: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for eps in [0.1f64, 1.0, 2.0] {
        let src = format!("let score x y = if x = y then 1 else 0\nlet main (d: bool) = expMech({}, score, d, [true; false])\n", eps);
        let prog = parse(&src).unwrap();
        let space = InputSpace::<f64>::Explicit(vec![Value::Bool(false), Value::Bool(true)]);
        let r = check_program(&prog, &[], &AdjacencyRel::BoolListFlip, &space, FDivKind::EpsD(eps), 0.0, &VerifyOptions::default()).unwrap();
        assert_eq!(r.pairs.len(), 1);
        worst_div = worst_div.max(r.max_divergence);
        for input in [true, false] {
            let d = run_program::<f64>(&prog, &Value::Bool(input), &[], &EvalConfig::default()).unwrap();
            let ratio = d.mass(&Value::Bool(input)) / d.mass(&Value::Bool(!input));
            worst_ratio = worst_ratio.max((ratio - (eps / 2.0).exp()).abs());
        }
    }
    verdict(worst_div <= 1e-12 && worst_ratio <= 1e-12, format!("max eps-D {:.1e}, mass ratio off e^(eps/2) by {:.1e}", worst_div, worst_ratio))
}

fn pipeline() -> Verdict {
    let f = corpus::fixtures().into_iter().find(|f| f.name == "beta-input").unwrap();
    let r = run_fixture(&f, &VerifyOptions::default()).unwrap();
    let Some(b) = r.brute_force else { return verdict(false, r.brute_force_error.unwrap_or_default()) };
    let both = b.pairs.iter().all(|p| p.forward.is_finite() && p.backward.is_finite());
    verdict(
        b.max_divergence <= 1e-9 && both && b.inputs == 31,
        format!("{} inputs, {} adjacent pairs in both orientations, max eps-D {:.1e} at claimed {}", b.inputs, b.pairs.len(), b.max_divergence, b.kind),
    )
}

fn corpus_types() -> Verdict {
    let mut problems = Vec::new();
    let fixtures = corpus::fixtures();
    for f in &fixtures {
        let r = run_fixture(f, &VerifyOptions::default()).unwrap();
        if !r.relcheck_accepted {
            problems.push(format!("{} rejected: {:?}", f.name, r.relcheck_detail));
        }
        if !r.brute_force_pass() {
            problems.push(format!("{} refuted by brute force", f.name));
        }
    }
    let claim = |name: &str| {
        let f = fixtures.iter().find(|f| f.name == name).unwrap();
        f.claim(&f.parse_annotation().unwrap()).unwrap()
    };
    // eps = 1 for beta-output; eps = 1, hV = kv = 1 (s = 1/2) for normal-output
    if claim("beta-output").kind != FDivKind::EpsD(2.0) {
        problems.push("beta-output is not typed at epsD(2 eps)".into());
    }
    if claim("normal-output").kind != FDivKind::EpsD(0.5) {
        problems.push("normal-output is not typed at epsD(s eps)".into());
    }
    let rho = named_constant("rho").unwrap();
    match claim("hellinger-exp").kind {
        FDivKind::EpsD(e) if (e - rho).abs() < 1e-12 => {}
        k => problems.push(format!("hellinger-exp typed at {}", k)),
    }
    let mut caught = 0;
    let muts = corpus::mutations();
    for m in &muts {
        let r = run_fixture(m, &VerifyOptions::default()).unwrap();
        if !r.relcheck_accepted || !r.brute_force_pass() {
            caught += 1;
        } else {
            problems.push(format!("mutation {} slipped through", m.name));
        }
    }
    let detail = format!("{}/{} fixtures accepted and confirmed, {}/{} mutations caught", fixtures.len() - problems.iter().filter(|p| !p.starts_with("mutation")).count().min(fixtures.len()), fixtures.len(), caught, muts.len());
    if problems.is_empty() {
        verdict(fixtures.len() == 7, detail)
    } else {
        verdict(false, format!("{}: {}", detail, problems.join("; ")))
    }
}

fn suites() -> Verdict {
    let r = check_composition_and_dpi(500, 0x5eed);
    let bad: Vec<String> = r.lines.iter().filter(|l| !l.pass).map(|l| format!("{} ({} failures)", l.suite, l.failures)).collect();
    let excess = r.lines.iter().map(|l| l.worst_excess).fold(f64::NEG_INFINITY, f64::max);
    verdict(r.pass, if bad.is_empty() { format!("{} suites, worst excess {:.1e}", r.lines.len(), excess) } else { bad.join(", ") })
}

fn discretization() -> Verdict {
    let eps = 1.0;
    let (g_eps, g_delta) = (0.5, 0.1);
    let sigma = mech::gauss_sigma(g_eps, g_delta).unwrap();
    let mut rows = Vec::new();
    let mut ok = true;
    for cpu in [10u32, 20, 40] {
        let w0 = Window::laplace(0.0, eps, cpu);
        let w1 = Window::laplace(1.0, eps, cpu);
        let lw = Window { k_lo: w0.k_lo, k_hi: w1.k_hi, cells_per_unit: cpu };
        let (a, b) = (mech::laplace_mech(&eps, &0.0, &lw).unwrap(), mech::laplace_mech(&eps, &1.0, &lw).unwrap());
        let lap = fdiv(FDivKind::EpsD(eps), &a, &b).max(fdiv(FDivKind::EpsD(eps), &b, &a));
        let lap_slack = mech::laplace_slack(eps, eps, &lw);
        let g0 = Window::gauss(0.0, sigma, cpu);
        let g1 = Window::gauss(1.0, sigma, cpu);
        let gw = Window { k_lo: g0.k_lo, k_hi: g1.k_hi, cells_per_unit: cpu };
        let (c, d) = (mech::gauss_mech(&sigma, &0.0, &gw).unwrap(), mech::gauss_mech(&sigma, &1.0, &gw).unwrap());
        let gauss = fdiv(FDivKind::EpsD(g_eps), &c, &d).max(fdiv(FDivKind::EpsD(g_eps), &d, &c));
        let gauss_slack = mech::gauss_slack(sigma, g_eps, &gw);
        ok &= lap <= lap_slack && gauss <= g_delta + gauss_slack;
        rows.push((cpu, lap, lap_slack, gauss, gauss_slack));
    }
    let mut ratios = Vec::new();
    for w in rows.windows(2) {
        let (rl, rg) = (w[0].2 / w[1].2, w[0].4 / w[1].4);
        ok &= (rl - 2.0).abs() <= 0.4 && (rg - 2.0).abs() <= 0.4;
        ratios.push(format!("{:.2}/{:.2}", rl, rg));
    }
    let cells: Vec<String> = rows.iter().map(|(c, l, ls, g, gs)| format!("{} cells/unit: laplace {:.1e} <= {:.1e}, gauss {:.1e} <= {} + {:.1e}", c, l, ls, g, g_delta, gs)).collect();
    verdict(ok, format!("{}; slack ratios on doubling (laplace/gauss) {}", cells.join(", "), ratios.join(", ")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict, Option<Duration>); 7] = [
        (1, "conjugacy oracle", conjugacy, Some(Duration::from_secs(30))),
        (2, "Hellinger and SD lemma bounds", lemmas, Some(Duration::from_secs(10))),
        (3, "exponential mechanism exactness", exp_mech_exactness, None),
        (4, "input-perturbation pipeline", pipeline, Some(Duration::from_secs(120))),
        (5, "stated types of the example programs", corpus_types, None),
        (6, "property suites", suites, None),
        (7, "Laplace/Gaussian discretization honesty", discretization, None),
    ];
    let mut failed = 0;
    for (n, title, run, budget) in criteria {
        let start = Instant::now();
        let mut v = run();
        let t = start.elapsed();
        if let Some(b) = budget {
            if t > b {
                v.pass = false;
                v.detail = format!("{}; over the {}s budget", v.detail, b.as_secs());
            }
        }
        line(n, title, &v, t);
        failed += usize::from(!v.pass);
    }
    let _ = writeln!(std::io::stderr(), "acceptance: {}/7 criteria pass", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
