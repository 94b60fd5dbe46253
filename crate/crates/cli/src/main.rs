//! `privinfer`: parse, type, run and verify probabilistic programs.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use privinfer::corpus::{self, FixtureResult};
use privinfer::dist::{dist_to_json, fdiv, parse_dist_json, Dist, FDivKind};
use privinfer::dpverify::{check_program, AdjacencyRel, InputSpace};
use privinfer::eval::{Evaluator, Valuation, Value};
use privinfer::infer::alg_inf;
use privinfer::mech::{self, Window};
use privinfer::reltype::{parse_rt_named, relcheck_program};
use privinfer::syntax::{parse, parse_named, pretty, Expr};
use privinfer::types::{typecheck, TypeEnv};

use config::Settings;

/// `println!` that ignores a closed stdout.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "privinfer", version, about = "Probabilistic programs with differential privacy certificates")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cells of the [0,1] grid (overrides the config file and PRIVINFER_GRID_N).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Closure applications allowed per evaluation.
    #[arg(long, global = true)]
    fuel: Option<u64>,
    /// Seed for sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a program and print it back.
    Parse {
        file: PathBuf,
        /// Print the syntax tree as JSON.
        #[arg(long)]
        json_ast: bool,
    },
    /// Print the simple type of a program.
    Check { file: PathBuf },
    /// Evaluate a program applied to the given argument expressions.
    Run {
        file: PathBuf,
        args: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a program and print its result as a symbolic distribution.
    Infer { file: PathBuf, args: Vec<String> },
    /// Check a program against relational type annotations.
    Relcheck {
        file: PathBuf,
        #[arg(long = "type")]
        annotation: PathBuf,
    },
    /// Brute-force a privacy claim over every adjacent pair of small inputs.
    VerifyDp(VerifyArgs),
    /// f-divergence between two distributions stored as JSON.
    Divergence {
        #[arg(long)]
        kind: FDivKind,
        a: PathBuf,
        b: PathBuf,
    },
    /// Run a mechanism on its own.
    Mech {
        #[command(subcommand)]
        mech: MechCmd,
    },
    /// Check every example program with both the type checker and the oracle.
    Corpus {
        #[arg(long)]
        json: bool,
        /// Also run the mutated programs that must be rejected.
        #[arg(long)]
        mutations: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Rel {
    Flip,
    L1,
    L1Multi,
}

#[derive(Args)]
struct VerifyArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    rel: Rel,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long)]
    max_len: usize,
    /// Element values of real lists (l1 adjacency).
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
    values: Vec<f64>,
    /// Further arguments passed after the database, as expressions.
    #[arg(long = "arg")]
    args: Vec<String>,
    /// Discretization slack added to the claimed bound.
    #[arg(long, default_value_t = 0.0)]
    slack: f64,
    /// Largest input space accepted.
    #[arg(long)]
    max_inputs: Option<usize>,
    /// Accept input spaces above the cap.
    #[arg(long)]
    allow_large: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MechOut {
    /// Lattice cells per unit for Laplace and Gaussian outputs.
    #[arg(long, default_value_t = 10)]
    cells: u32,
    /// Draw samples from the output distribution (demonstration only).
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum MechCmd {
    Laplace {
        #[arg(long)]
        eps: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[command(flatten)]
        out: MechOut,
    },
    /// Gaussian mechanism with `--sigma`, or with `--eps` and `--delta`.
    Gauss {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, requires = "delta")]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[command(flatten)]
        out: MechOut,
    },
    /// Exponential mechanism over `label=score` candidates.
    Exp {
        #[arg(long)]
        eps: f64,
        #[arg(long = "score", required = true)]
        scores: Vec<String>,
        #[command(flatten)]
        out: MechOut,
    },
}

/// Exit status: failed verification or diagnostics are 1, usage errors 2.
enum Fail {
    Verify(String),
    Usage(String),
}

type Res = Result<(), Fail>;

fn usage(e: impl ToString) -> Fail {
    Fail::Usage(e.to_string())
}

fn verify(e: impl ToString) -> Fail {
    Fail::Verify(e.to_string())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = settings(&cli).and_then(|s| dispatch(cli.cmd, &s));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Verify(m)) => {
            if !m.is_empty() {
                eprintln!("{}", m);
            }
            ExitCode::from(1)
        }
        Err(Fail::Usage(m)) => {
            eprintln!("error: {}", m);
            ExitCode::from(2)
        }
    }
}

fn settings(cli: &Cli) -> Result<Settings, Fail> {
    let mut s = config::load(cli.config.as_deref(), std::env::var(config::GRID_ENV).ok()).map_err(usage)?;
    if let Some(n) = cli.grid {
        if n == 0 {
            return Err(usage("--grid must be positive"));
        }
        s.eval.grid_n = n;
    }
    if let Some(f) = cli.fuel {
        s.eval.fuel = f;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn dispatch(cmd: Cmd, s: &Settings) -> Res {
    match cmd {
        Cmd::Parse { file, json_ast } => cmd_parse(&file, json_ast),
        Cmd::Check { file } => cmd_check(&file),
        Cmd::Run { file, args, json } => cmd_run(&file, &args, json, s),
        Cmd::Infer { file, args } => cmd_infer(&file, &args, s),
        Cmd::Relcheck { file, annotation } => cmd_relcheck(&file, &annotation),
        Cmd::VerifyDp(a) => cmd_verify(a, s),
        Cmd::Divergence { kind, a, b } => cmd_divergence(kind, &a, &b),
        Cmd::Mech { mech } => cmd_mech(mech, s),
        Cmd::Corpus { json, mutations } => cmd_corpus(json, mutations, s),
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {}", path.display(), e)))
}

fn load_program(path: &Path) -> Result<Expr, Fail> {
    let text = read(path)?;
    parse_named(&path.display().to_string(), &text).map_err(verify)
}

fn print_json(v: &impl serde::Serialize) {
    out!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn cmd_parse(file: &Path, json_ast: bool) -> Res {
    let e = load_program(file)?;
    if json_ast {
        print_json(&e);
    } else {
        out!("{}", pretty(&e));
    }
    Ok(())
}

fn cmd_check(file: &Path) -> Res {
    let e = load_program(file)?;
    let t = typecheck(&TypeEnv::new(), &e).map_err(verify)?;
    out!("{}", t);
    Ok(())
}

fn parse_args(args: &[String]) -> Result<Vec<Expr>, Fail> {
    args.iter().map(|a| parse(a).map_err(|e| usage(format!("argument `{}`: {}", a, e)))).collect()
}

/// Evaluates `prog args..` and hands the result to `k`.
fn with_result<T>(prog: &Expr, args: &[Expr], s: &Settings, k: impl FnOnce(&Value<'_, f64>) -> Result<T, Fail>) -> Result<T, Fail> {
    let ev = Evaluator::new(s.eval.clone());
    let theta = Valuation::new();
    let f = ev.eval_closed(&theta, prog).map_err(verify)?;
    let vals = args.iter().map(|a| ev.eval_closed(&theta, a)).collect::<Result<Vec<_>, _>>().map_err(verify)?;
    let out = ev.apply_all(f, vals, &prog.span).map_err(verify)?;
    k(&out)
}

fn cmd_run(file: &Path, args: &[String], json: bool, s: &Settings) -> Res {
    let prog = load_program(file)?;
    let args = parse_args(args)?;
    with_result(&prog, &args, s, |v| {
        if json {
            print_json(&v.to_json());
        } else {
            out!("{}", v);
        }
        Ok(())
    })
}

fn cmd_infer(file: &Path, args: &[String], s: &Settings) -> Res {
    let prog = load_program(file)?;
    let args = parse_args(args)?;
    with_result(&prog, &args, s, |v| {
        let sym = match v {
            Value::Sym(sd) => (**sd).clone(),
            Value::Dist(d) => match d.source() {
                Some(src) if !d.is_materialized() => src.clone(),
                _ => {
                    let pmf = d.dist().map_err(verify)?;
                    let pts = pmf
                        .iter()
                        .map(|(x, p)| x.to_grid_point().map(|g| (g, *p)).ok_or_else(|| verify(format!("no family describes outcomes like {}", x))))
                        .collect::<Result<Vec<_>, _>>()?;
                    alg_inf(&Dist::from_pairs(pts).map_err(verify)?, None).map_err(verify)?
                }
            },
            other => return Err(verify(format!("result is a {}, not a distribution", other.kind()))),
        };
        out!("{}", sym);
        Ok(())
    })
}

fn cmd_relcheck(file: &Path, annotation: &Path) -> Res {
    let prog = load_program(file)?;
    let rt_text = read(annotation)?;
    let rt = parse_rt_named(&annotation.display().to_string(), &rt_text).map_err(verify)?;
    let d = relcheck_program(&prog, &rt).map_err(verify)?;
    print_json(&d);
    let unproved = d.unproved();
    if unproved.is_empty() {
        eprintln!("accepted: {} verification conditions proved", d.all_vcs().len());
        Ok(())
    } else {
        for v in &unproved {
            eprintln!("Unproved VC [{}] {}: {}", v.vc.rule, v.vc.goal, v.outcome);
        }
        Err(verify(format!("rejected: {} unproved verification condition(s)", unproved.len())))
    }
}

fn cmd_verify(a: VerifyArgs, s: &Settings) -> Res {
    if !(a.eps >= 0.0) || !(a.delta >= 0.0) {
        return Err(usage("--eps and --delta must be nonnegative"));
    }
    let prog = load_program(&a.file)?;
    let (rel, space) = match a.rel {
        Rel::Flip => (AdjacencyRel::BoolListFlip, InputSpace::BoolLists { max_len: a.max_len }),
        Rel::L1 | Rel::L1Multi => {
            let multi = matches!(a.rel, Rel::L1Multi);
            (AdjacencyRel::RealListL1 { multi }, InputSpace::RealLists { values: a.values.clone(), max_len: a.max_len })
        }
    };
    let exprs = parse_args(&a.args)?;
    let ev = Evaluator::new(s.eval.clone());
    let mut trailing = Vec::new();
    for (e, src) in exprs.iter().zip(&a.args) {
        let v = ev.eval_closed(&Valuation::new(), e).map_err(verify)?;
        trailing.push(v.to_owned_data().ok_or_else(|| usage(format!("argument `{}` is not data", src)))?);
    }
    let mut opts = s.verify_options(a.slack);
    if let Some(m) = a.max_inputs {
        opts.max_inputs = m;
    }
    opts.allow_large |= a.allow_large;
    let r = check_program(&prog, &trailing, &rel, &space, FDivKind::EpsD(a.eps), a.delta, &opts).map_err(|e| match e {
        privinfer::dpverify::VerifyError::TooLarge { .. } => usage(e),
        e => verify(e),
    })?;
    if a.json {
        print_json(&r);
    } else {
        out!("{}", r);
    }
    if r.pass {
        Ok(())
    } else {
        Err(verify(""))
    }
}

fn cmd_divergence(kind: FDivKind, a: &Path, b: &Path) -> Res {
    let load = |p: &Path| -> Result<_, Fail> { parse_dist_json(&read(p)?).map_err(|e| usage(format!("{}: {}", p.display(), e))) };
    let (da, db) = (load(a)?, load(b)?);
    out!("{}", fdiv(kind, &da, &db));
    Ok(())
}

fn emit_mech<V: Ord + Clone>(d: &Dist<V, f64>, label: impl Fn(&V) -> serde_json::Value, show: impl Fn(&V) -> String, out: &MechOut, seed: u64, extra: serde_json::Value) -> Res {
    if let Some(n) = out.sample {
        let w = WeightedIndex::new(d.iter().map(|(_, p)| *p)).map_err(verify)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = d.pairs();
        let draws: Vec<&V> = (0..n).map(|_| &pts[w.sample(&mut rng)].0).collect();
        if out.json {
            print_json(&json!({"seed": seed, "samples": draws.iter().map(|v| label(v)).collect::<Vec<_>>()}));
        } else {
            for v in draws {
                out!("{}", show(v));
            }
        }
        return Ok(());
    }
    if out.json {
        let mut j = json!({"distribution": dist_to_json(d, label)});
        if let (Some(obj), serde_json::Value::Object(more)) = (j.as_object_mut(), extra) {
            obj.extend(more);
        }
        print_json(&j);
    } else {
        for (v, p) in d.iter() {
            out!("{}\t{:.6e}", show(v), p);
        }
        if let serde_json::Value::Object(more) = extra {
            for (k, v) in more {
                eprintln!("{}: {}", k, v);
            }
        }
    }
    Ok(())
}

fn cmd_mech(m: MechCmd, s: &Settings) -> Res {
    let cell_json = |c: &privinfer::dist::Cell<f64>| json!({"rep": c.rep, "lo": c.lo, "hi": c.hi});
    let cell_show = |c: &privinfer::dist::Cell<f64>| format!("[{}, {})", c.lo, c.hi);
    match m {
        MechCmd::Laplace { eps, x, out } => {
            let w = Window::laplace(x, eps, out.cells);
            let d = mech::laplace_mech(&eps, &x, &w).map_err(usage)?;
            let slack = mech::laplace_slack(eps, eps, &w);
            emit_mech(&d, cell_json, cell_show, &out, s.seed, json!({"cell_width": w.width(), "slack": slack}))
        }
        MechCmd::Gauss { x, sigma, eps, delta, out } => {
            let sigma = match (sigma, eps, delta) {
                (Some(sg), None, None) => sg,
                (None, Some(e), Some(dl)) => mech::gauss_sigma(e, dl).map_err(usage)?,
                _ => return Err(usage("give either --sigma or both --eps and --delta")),
            };
            let w = Window::gauss(x, sigma, out.cells);
            let d = mech::gauss_mech(&sigma, &x, &w).map_err(usage)?;
            emit_mech(&d, cell_json, cell_show, &out, s.seed, json!({"sigma": sigma, "cell_width": w.width()}))
        }
        MechCmd::Exp { eps, scores, out } => {
            let mut scored = Vec::new();
            for sc in &scores {
                let (l, v) = sc.split_once('=').ok_or_else(|| usage(format!("--score expects label=value, got `{}`", sc)))?;
                let v: f64 = v.trim().parse().map_err(|_| usage(format!("score `{}` is not a number", v)))?;
                scored.push((l.trim().to_string(), v));
            }
            let d = mech::exp_mech(&eps, scored).map_err(usage)?;
            emit_mech(&d, |l| json!(l), |l| l.clone(), &out, s.seed, json!({}))
        }
    }
}

fn verdict(r: &FixtureResult) -> (String, String) {
    let rel = if r.relcheck_accepted { "accepted".to_string() } else { "rejected".to_string() };
    let bf = match (&r.brute_force, &r.brute_force_error) {
        (Some(b), _) => {
            let (word, op) = if b.pass { ("pass", "<=") } else { ("FAIL", ">") };
            format!("{}: {:.2e} {} {} + {:.1e}", word, b.max_divergence, op, fmt_num(b.claimed_delta), b.slack)
        }
        (None, Some(e)) => format!("error: {}", e),
        _ => "not run".into(),
    };
    (rel, bf)
}

/// The codomain after the last top-level arrow.
fn result_type(t: &str) -> &str {
    let mut depth = 0i32;
    let mut cut = 0;
    let b = t.as_bytes();
    for i in 0..b.len() {
        match b[i] {
            b'{' | b'[' | b'(' => depth += 1,
            b'}' | b']' | b')' => depth -= 1,
            b'-' if depth == 0 && b.get(i + 1) == Some(&b'>') => cut = i + 2,
            _ => {}
        }
    }
    t[cut..].trim()
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x.to_i64().unwrap_or(0))
    } else {
        format!("{:.6}", x)
    }
}

fn cmd_corpus(json_out: bool, with_mutations: bool, s: &Settings) -> Res {
    let mut opts = s.verify_options(0.0);
    opts.allow_large = true;
    let mut all = corpus::fixtures();
    if with_mutations {
        all.extend(corpus::mutations());
    }
    let mut results = Vec::new();
    for f in &all {
        log::info!("running fixture {}", f.name);
        results.push(corpus::run_fixture(f, &opts).map_err(verify)?);
    }
    let ok = results.iter().all(|r| r.as_expected());
    if json_out {
        let rows: Vec<_> = results.iter().map(|r| json!({"result": r, "as_expected": r.as_expected()})).collect();
        print_json(&json!({"fixtures": rows, "pass": ok}));
    } else {
        let rows: Vec<[String; 4]> = results
            .iter()
            .map(|r| {
                let (rel, bf) = verdict(r);
                let name = if r.expect.relcheck { r.name.clone() } else { format!("{} (mutation)", r.name) };
                [name, result_type(&r.claimed_type).to_string(), rel, bf]
            })
            .collect();
        let header = ["fixture", "claimed type", "relcheck", "brute force"].map(String::from);
        let widths: Vec<usize> = (0..4).map(|i| rows.iter().chain([&header]).map(|r| r[i].chars().count()).max().unwrap_or(0)).collect();
        let line = |r: &[String; 4]| {
            let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{:<w$}", c, w = *w)).collect();
            cells.join("  ").trim_end().to_string()
        };
        out!("{}", line(&header));
        for r in &rows {
            out!("{}", line(r));
        }
        let expected = results.iter().filter(|r| r.as_expected()).count();
        out!("{}/{} as expected", expected, results.len());
    }
    if ok {
        Ok(())
    } else {
        Err(verify(""))
    }
}
