//! The shipped fixture corpus: annotated programs with concrete brute-force instances.

use num_rational::BigRational;
use serde::Serialize;

use crate::dist::FDivKind;
use crate::dpverify::{check_program, folding_slack, AdjacencyRel, DPReport, InputSpace, VerifyOptions};
use crate::eval::{EvalConfig, Value};
use crate::reltype::parse::eval_closed;
use crate::reltype::{parse_rt_named, relcheck_program, Derivation, FIdx, RelType, RtFile, Side, Term};
use crate::syntax::{parse_named, Expr};

/// Elements of the database lists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Bools,
    /// Real records drawn from the listed values.
    Reals(&'static [f64]),
    /// Categories `0..k`.
    Categories(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Adjacency {
    /// One record differs.
    Flip,
    /// One real record moves by at most 1.
    L1,
}

/// Verdicts a fixture is expected to receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Expect {
    pub relcheck: bool,
    pub brute_force: bool,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub title: &'static str,
    pub program_file: &'static str,
    pub program: &'static str,
    pub annotation_file: &'static str,
    pub annotation: &'static str,
    pub adjacency: Adjacency,
    pub domain: Domain,
    pub max_len: usize,
    /// Values of `main`'s parameters after the database, in order.
    pub params: &'static [(&'static str, f64)],
    pub mech_cells_per_unit: u32,
    /// Laplace invocations per run.
    pub laplace_calls: usize,
    /// Gaussian invocations per database record.
    pub gauss_calls_per_record: usize,
    pub expect: Expect,
}

macro_rules! file {
    ($f:literal) => {
        ($f, include_str!(concat!("../corpus/", $f)))
    };
}

const ACCEPT: Expect = Expect { relcheck: true, brute_force: true };

struct Files {
    program: (&'static str, &'static str),
    annotation: (&'static str, &'static str),
}

#[allow(clippy::too_many_arguments)]
fn fixture(
    name: &'static str,
    title: &'static str,
    files: Files,
    adjacency: Adjacency,
    domain: Domain,
    max_len: usize,
    params: &'static [(&'static str, f64)],
    expect: Expect,
) -> Fixture {
    Fixture {
        name,
        title,
        program_file: files.program.0,
        program: files.program.1,
        annotation_file: files.annotation.0,
        annotation: files.annotation.1,
        adjacency,
        domain,
        max_len,
        params,
        mech_cells_per_unit: 10,
        laplace_calls: 0,
        gauss_calls_per_record: 0,
        expect,
    }
}

const UNIT_REALS: &[f64] = &[0.0, 0.5, 1.0];

/// The seven annotated programs.
pub fn fixtures() -> Vec<Fixture> {
    vec![
        fixture(
            "beta-input",
            "beta input perturbation",
            Files { program: file!("beta_input.pinf"), annotation: file!("beta_input.rt") },
            Adjacency::Flip,
            Domain::Bools,
            4,
            &[("a", 1.0), ("b", 1.0), ("eps", 1.0)],
            ACCEPT,
        ),
        Fixture {
            mech_cells_per_unit: 2,
            gauss_calls_per_record: 1,
            ..fixture(
                "normal-input",
                "normal input perturbation",
                Files { program: file!("normal_input.pinf"), annotation: file!("normal_input.rt") },
                Adjacency::L1,
                Domain::Reals(UNIT_REALS),
                2,
                &[("hM", 0.0), ("hV", 1.0), ("kv", 1.0), ("eps", 0.5), ("delta", 0.1)],
                ACCEPT,
            )
        },
        Fixture {
            mech_cells_per_unit: 2,
            laplace_calls: 2,
            ..fixture(
                "beta-output",
                "beta l1-output perturbation",
                Files { program: file!("beta_output.pinf"), annotation: file!("beta_output.rt") },
                Adjacency::Flip,
                Domain::Bools,
                4,
                &[("a", 1.0), ("b", 1.0), ("eps", 1.0)],
                ACCEPT,
            )
        },
        Fixture {
            laplace_calls: 1,
            ..fixture(
                "normal-output",
                "normal l1-output perturbation",
                Files { program: file!("normal_output.pinf"), annotation: file!("normal_output.rt") },
                Adjacency::L1,
                Domain::Reals(UNIT_REALS),
                2,
                &[("hM", 0.0), ("hV", 1.0), ("kv", 1.0), ("eps", 1.0)],
                ACCEPT,
            )
        },
        fixture(
            "hellinger-exp",
            "Hellinger exponential mechanism",
            Files { program: file!("hellinger_exp.pinf"), annotation: file!("hellinger_exp.rt") },
            Adjacency::Flip,
            Domain::Bools,
            3,
            &[("a", 1.0), ("b", 1.0), ("eps", 1.0)],
            ACCEPT,
        ),
        fixture(
            "statdist-exp",
            "statistical-distance exponential mechanism",
            Files { program: file!("statdist_exp.pinf"), annotation: file!("statdist_exp.rt") },
            Adjacency::Flip,
            Domain::Bools,
            3,
            &[("a", 1.0), ("b", 1.0), ("eps", 1.0)],
            ACCEPT,
        ),
        fixture(
            "dirichlet",
            "Dirichlet-multinomial posterior",
            Files { program: file!("dirichlet.pinf"), annotation: file!("dirichlet.rt") },
            Adjacency::Flip,
            Domain::Categories(3),
            2,
            &[("a1", 1.0), ("a2", 1.0), ("a3", 1.0)],
            ACCEPT,
        ),
    ]
}

/// Randomized response on every record, the base of the mutation suite.
pub fn addnoise() -> Fixture {
    fixture(
        "addnoise",
        "randomized response",
        Files { program: file!("addnoise.pinf"), annotation: file!("addnoise.rt") },
        Adjacency::Flip,
        Domain::Bools,
        4,
        &[("eps", 1.0)],
        ACCEPT,
    )
}

/// Deliberately broken variants of [`addnoise`].
pub fn mutations() -> Vec<Fixture> {
    vec![
        fixture(
            "noise-removed",
            "randomized response without noise",
            Files { program: file!("broken_addnoise.pinf"), annotation: file!("addnoise.rt") },
            Adjacency::Flip,
            Domain::Bools,
            3,
            &[("eps", 1.0)],
            Expect { relcheck: false, brute_force: false },
        ),
        // the exponential mechanism with a 1-sensitive score over two outputs is in fact
        // eps/2-private, so only the checker notices this one
        fixture(
            "eps-halved",
            "randomized response claimed at eps/2",
            Files { program: file!("addnoise.pinf"), annotation: file!("addnoise_half.rt") },
            Adjacency::Flip,
            Domain::Bools,
            3,
            &[("eps", 1.0)],
            Expect { relcheck: false, brute_force: true },
        ),
        fixture(
            "eps-quartered",
            "randomized response claimed at eps/4",
            Files { program: file!("addnoise.pinf"), annotation: file!("addnoise_quarter.rt") },
            Adjacency::Flip,
            Domain::Bools,
            3,
            &[("eps", 1.0)],
            Expect { relcheck: false, brute_force: false },
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}: no annotation for main")]
    NoMain(String),
    #[error("{file}: main has {found} parameters after the database, the fixture gives {given}")]
    Arity { file: String, found: usize, given: usize },
    #[error("{0}: the claimed index does not evaluate to a number at the fixture parameters")]
    Claim(String),
}

/// A divergence claim at concrete parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Claim {
    pub kind: FDivKind,
    pub delta: f64,
}

impl Fixture {
    pub fn parse_program(&self) -> Result<Expr, CorpusError> {
        parse_named(self.program_file, self.program).map_err(|e| CorpusError::Parse(e.to_string()))
    }

    pub fn parse_annotation(&self) -> Result<RtFile, CorpusError> {
        parse_rt_named(self.annotation_file, self.annotation).map_err(|e| CorpusError::Parse(e.to_string()))
    }

    pub fn rel(&self) -> AdjacencyRel<f64> {
        match self.adjacency {
            Adjacency::Flip => AdjacencyRel::BoolListFlip,
            Adjacency::L1 => AdjacencyRel::RealListL1 { multi: false },
        }
    }

    pub fn space(&self) -> InputSpace<f64> {
        match self.domain {
            Domain::Bools => InputSpace::BoolLists { max_len: self.max_len },
            Domain::Reals(v) => InputSpace::RealLists { values: v.to_vec(), max_len: self.max_len },
            Domain::Categories(k) => InputSpace::RealLists { values: (0..k).map(f64::from).collect(), max_len: self.max_len },
        }
    }

    pub fn trailing_args(&self) -> Vec<Value<'static, f64>> {
        self.params.iter().map(|(_, v)| Value::num(*v)).collect()
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig { mech_cells_per_unit: self.mech_cells_per_unit, ..EvalConfig::default() }
    }

    /// The monad index of `main`'s result evaluated at the fixture parameters.
    pub fn claim(&self, rt: &RtFile) -> Result<Claim, CorpusError> {
        let main = rt.get("main").ok_or_else(|| CorpusError::NoMain(self.annotation_file.into()))?;
        claim_at(&main.ty, self.params).ok_or_else(|| CorpusError::Claim(self.annotation_file.into())).and_then(|(c, n)| {
            if n == self.params.len() {
                Ok(c)
            } else {
                Err(CorpusError::Arity { file: self.annotation_file.into(), found: n, given: self.params.len() })
            }
        })
    }

    pub fn slack(&self, claim: &Claim) -> f64 {
        let eps = match claim.kind {
            FDivKind::EpsD(e) => e,
            _ => 0.0,
        };
        folding_slack(eps, self.laplace_calls, self.gauss_calls_per_record * self.max_len)
    }
}

/// Peels `main`'s parameters (the database first), substitutes the given values and
/// evaluates the result index. Also returns the number of parameters after the database.
pub fn claim_at(ty: &RelType, params: &[(&str, f64)]) -> Option<(Claim, usize)> {
    let mut t = ty;
    let mut names = Vec::new();
    while let RelType::Pi { var, cod, .. } = t {
        names.push(var.clone());
        t = cod;
    }
    let RelType::Monad { f, delta, .. } = t else { return None };
    let vals: Vec<(String, f64)> = names.iter().skip(1).zip(params).map(|(n, (_, v))| (n.clone(), *v)).collect();
    let sub = |term: &Term| {
        term.subst(&|u| {
            let name = match u {
                Term::Var(x) | Term::Rel(x, Side::L) | Term::Rel(x, Side::R) => x,
                _ => return None,
            };
            vals.iter().find(|(n, _)| n == name).and_then(|(_, v)| BigRational::from_float(*v)).map(Term::Num)
        })
    };
    let kind = match f {
        FIdx::EpsD(p) => FDivKind::EpsD(eval_closed(&sub(&p.to_term()))?),
        FIdx::SD => FDivKind::SD,
        FIdx::HD => FDivKind::HD,
        FIdx::KL => FDivKind::KL,
    };
    let delta = match delta {
        Term::Inf => f64::INFINITY,
        d => eval_closed(&sub(d))?,
    };
    Some((Claim { kind, delta }, names.len().saturating_sub(1)))
}

/// Outcome of checking one fixture both ways.
#[derive(Debug, Clone, Serialize)]
pub struct FixtureResult {
    pub name: String,
    pub title: String,
    pub claimed_type: String,
    pub claim: Option<Claim>,
    pub relcheck_accepted: bool,
    /// Rule error or unproved goals when rejected.
    pub relcheck_detail: Vec<String>,
    #[serde(skip)]
    pub derivation: Option<Derivation>,
    pub brute_force: Option<DPReport>,
    pub brute_force_error: Option<String>,
    pub expect: Expect,
}

impl FixtureResult {
    pub fn brute_force_pass(&self) -> bool {
        self.brute_force.as_ref().map_or(false, |r| r.pass)
    }

    /// Both verdicts match the fixture's expectation.
    pub fn as_expected(&self) -> bool {
        self.relcheck_accepted == self.expect.relcheck && self.brute_force_pass() == self.expect.brute_force
    }
}

/// Runs the relational checker and the brute-force oracle on a fixture.
pub fn run_fixture(f: &Fixture, opts: &VerifyOptions) -> Result<FixtureResult, CorpusError> {
    let prog = f.parse_program()?;
    let rt = f.parse_annotation()?;
    let main = rt.get("main").ok_or_else(|| CorpusError::NoMain(f.annotation_file.into()))?;
    let claim = f.claim(&rt)?;
    let (accepted, detail, derivation) = match relcheck_program(&prog, &rt) {
        Ok(d) => {
            let detail = d.unproved().iter().map(|v| format!("{}: {}", v.vc.rule, v.outcome)).collect();
            (d.accepted(), detail, Some(d))
        }
        Err(e) => (false, vec![e.to_string()], None),
    };
    let opts = VerifyOptions { eval: f.eval_config(), slack: opts.slack.max(f.slack(&claim)), ..opts.clone() };
    let (brute_force, brute_force_error) = match check_program(&prog, &f.trailing_args(), &f.rel(), &f.space(), claim.kind, claim.delta, &opts) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(FixtureResult {
        name: f.name.into(),
        title: f.title.into(),
        claimed_type: main.ty.to_string(),
        claim: Some(claim),
        relcheck_accepted: accepted,
        relcheck_detail: detail,
        derivation,
        brute_force,
        brute_force_error,
        expect: f.expect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_parses_with_a_claim() {
        for f in fixtures().iter().chain(mutations().iter()).chain(std::iter::once(&addnoise())) {
            f.parse_program().unwrap();
            let rt = f.parse_annotation().unwrap();
            f.claim(&rt).unwrap_or_else(|e| panic!("{}: {}", f.name, e));
        }
    }

    #[test]
    fn claims_at_fixture_parameters() {
        let all = fixtures();
        let claim = |name: &str| {
            let f = all.iter().find(|f| f.name == name).unwrap();
            f.claim(&f.parse_annotation().unwrap()).unwrap()
        };
        assert_eq!(claim("beta-output").kind, FDivKind::EpsD(2.0));
        assert_eq!(claim("normal-output").kind, FDivKind::EpsD(0.5));
        let FDivKind::EpsD(e) = claim("hellinger-exp").kind else { panic!() };
        assert!((e - 0.463251).abs() < 1e-5);
        let d = claim("dirichlet");
        assert_eq!(d.kind, FDivKind::HD);
        assert!((d.delta - 0.463251).abs() < 1e-5);
        assert_eq!(claim("normal-input").delta, 0.1);
    }
}

#[cfg(test)]
mod relcheck_tests {
    use super::*;

    #[test]
    fn relcheck_verdicts_match_expectations() {
        for f in fixtures().iter().chain(mutations().iter()).chain(std::iter::once(&addnoise())) {
            let prog = f.parse_program().unwrap();
            let rt = f.parse_annotation().unwrap();
            let d = relcheck_program(&prog, &rt).unwrap_or_else(|e| panic!("{}: {}", f.name, e));
            assert_eq!(d.accepted(), f.expect.relcheck, "{}", f.name);
        }
    }
}
