use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_privinfer"));
    c.env_remove("PRIVINFER_GRID_N");
    c
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("privinfer-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(c: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = c.output().unwrap();
    (status.code().unwrap_or(-1), String::from_utf8(stdout).unwrap(), String::from_utf8(stderr).unwrap())
}

fn assert_schema(schema: &str, out: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(schema);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let compiled = JSONSchema::compile(&schema).unwrap();
    let v: Value = serde_json::from_str(out).unwrap_or_else(|e| panic!("not JSON ({}): {}", e, out));
    if let Err(errs) = compiled.validate(&v) {
        let msgs: Vec<String> = errs.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{} violations: {:?}", schema, msgs);
    }
    v
}

const DIST_A: &str = r#"{"support": [true, false], "mass": ["0.25", "0.75"]}"#;
const DIST_B: &str = r#"{"support": [false, true], "mass": ["1/2", "1/2"]}"#;

#[test]
fn divergence_of_identical_files_is_zero() {
    let a = scratch("a.json", DIST_A);
    for kind in ["sd", "hd", "kl", "eps:0.5"] {
        let (code, out, _) = run(bin().args(["divergence", "--kind", kind]).arg(&a).arg(&a));
        assert_eq!(code, 0);
        assert_eq!(out.trim().parse::<f64>().unwrap(), 0.0, "{}", kind);
    }
}

#[test]
fn divergence_values_and_errors() {
    let a = scratch("a2.json", DIST_A);
    let b = scratch("b2.json", DIST_B);
    let (code, out, _) = run(bin().args(["divergence", "--kind", "sd"]).arg(&a).arg(&b));
    assert_eq!(code, 0);
    assert!((out.trim().parse::<f64>().unwrap() - 0.25).abs() < 1e-15);
    assert_schema("dist.schema.json", DIST_A);
    assert_schema("dist.schema.json", DIST_B);
    let bad = scratch("bad.json", r#"{"support": [1], "mass": ["0.5"]}"#);
    assert_eq!(run(bin().args(["divergence", "--kind", "sd"]).arg(&a).arg(&bad)).0, 2);
    assert_eq!(run(bin().args(["divergence", "--kind", "tv"]).arg(&a).arg(&b)).0, 2);
}

#[test]
fn broken_addnoise_is_rejected_with_an_unproved_vc() {
    let (code, out, err) = run(bin().arg("relcheck").arg(corpus("broken_addnoise.pinf")).arg("--type").arg(corpus("addnoise.rt")));
    assert_eq!(code, 1);
    assert!(err.contains("Unproved VC"), "{}", err);
    let d = assert_schema("derivation.schema.json", &out);
    assert_eq!(d["rule"], "Program");
}

#[test]
fn addnoise_is_accepted() {
    let (code, out, err) = run(bin().arg("relcheck").arg(corpus("addnoise.pinf")).arg("--type").arg(corpus("addnoise.rt")));
    assert_eq!(code, 0, "{}", err);
    assert_schema("derivation.schema.json", &out);
}

#[test]
fn verify_dp_exit_codes_and_report() {
    let prog = corpus("addnoise.pinf");
    let (code, out, _) = run(bin().arg("verify-dp").arg(&prog).args(["--rel", "flip", "--eps", "1", "--delta", "0", "--max-len", "4", "--arg", "1", "--json"]));
    assert_eq!(code, 0);
    let r = assert_schema("dp_report.schema.json", &out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["inputs"], 31);
    // the randomizer is not 0.4-private
    let (code, out, _) = run(bin().arg("verify-dp").arg(&prog).args(["--rel", "flip", "--eps", "0.4", "--max-len", "2", "--arg", "1"]));
    assert_eq!(code, 1);
    assert!(out.starts_with("FAIL"), "{}", out);
    // above the input cap without an override
    let (code, _, err) = run(bin().arg("verify-dp").arg(&prog).args(["--rel", "flip", "--eps", "1", "--max-len", "13", "--arg", "1"]));
    assert_eq!(code, 2);
    assert!(err.contains("cap"), "{}", err);
}

#[test]
fn identity_program_is_refuted() {
    let p = scratch("id.pinf", "let main (d: list bool) = return d\n");
    let (code, out, _) = run(bin().arg("verify-dp").arg(&p).args(["--rel", "flip", "--eps", "5", "--max-len", "2"]));
    assert_eq!(code, 1, "{}", out);
}

#[test]
fn parse_check_run_infer() {
    let p = scratch("post.pinf", "let main (n: real) = infer (observe (fun r -> mlet z = ran bernoulli(r) in return z) (ran beta(1, 1)))\n");
    let (code, out, _) = run(bin().arg("parse").arg(&p).arg("--json-ast"));
    assert_eq!(code, 0);
    serde_json::from_str::<Value>(&out).unwrap();
    let (code, out, err) = run(bin().arg("check").arg(&p));
    assert_eq!(code, 0, "{}", err);
    assert_eq!(out.trim(), "real -> D[[0,1]]");
    let (code, out, err) = run(bin().arg("infer").arg(&p).arg("1"));
    assert_eq!(code, 0, "{}", err);
    assert!(out.starts_with("beta(2"), "{}", out);
    let coin = scratch("coin.pinf", "let main (p: [0,1]) = ran bernoulli(p)\n");
    let (code, out, _) = run(bin().arg("run").arg(&coin).arg("0.25").arg("--json"));
    assert_eq!(code, 0);
    let d = assert_schema("dist.schema.json", &out);
    assert_eq!(d["mass"], serde_json::json!(["0.75", "0.25"]));
    let bad = scratch("bad.pinf", "let main = (fun x -> \n");
    assert_eq!(run(bin().arg("parse").arg(&bad)).0, 1);
    assert_eq!(run(bin().arg("parse").arg("/nonexistent/file.pinf")).0, 2);
}

#[test]
fn mechanisms_standalone() {
    let (code, out, _) = run(bin().args(["mech", "laplace", "--eps", "1", "--x", "-0.5", "--cells", "4", "--json"]));
    assert_eq!(code, 0);
    let m = assert_schema("mech.schema.json", &out);
    assert_eq!(m["cell_width"], 0.25);
    let (code, out, _) = run(bin().args(["mech", "gauss", "--x", "0", "--eps", "0.5", "--delta", "0.1", "--json"]));
    assert_eq!(code, 0);
    assert_schema("mech.schema.json", &out);
    let (code, out, _) = run(bin().args(["mech", "exp", "--eps", "2", "--score", "yes=1", "--score", "no=0", "--json"]));
    assert_eq!(code, 0);
    let m = assert_schema("mech.schema.json", &out);
    let mass: Vec<f64> = m["distribution"]["mass"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().parse().unwrap()).collect();
    // support is sorted: "no" before "yes"
    assert!((mass[1] / mass[0] - 1f64.exp()).abs() < 1e-12);
    let sample = |seed: &str| run(bin().args(["mech", "exp", "--eps", "2", "--score", "yes=1", "--score", "no=0", "--sample", "20", "--json", "--seed", seed])).1;
    let s1 = assert_schema("mech_samples.schema.json", &sample("7"));
    assert_eq!(s1, assert_schema("mech_samples.schema.json", &sample("7")));
    assert_eq!(run(bin().args(["mech", "gauss", "--x", "0"])).0, 2);
    assert_eq!(run(bin().args(["mech", "exp", "--eps", "1", "--score", "oops"])).0, 2);
}

#[test]
fn corpus_summary() {
    let (code, out, err) = run(bin().arg("corpus"));
    assert_eq!(code, 0, "{}", err);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("fixture") && lines[0].contains("claimed type") && lines[0].contains("relcheck") && lines[0].contains("brute force"));
    assert_eq!(lines.len(), 1 + 7 + 1);
    for l in &lines[1..8] {
        assert!(l.contains("accepted") && l.contains("pass:"), "{}", l);
    }
    assert_eq!(lines[8], "7/7 as expected");
}

#[test]
fn corpus_json_with_mutations() {
    let (code, out, err) = run(bin().args(["corpus", "--json", "--mutations"]));
    assert_eq!(code, 0, "{}", err);
    let v = assert_schema("corpus.schema.json", &out);
    assert_eq!(v["fixtures"].as_array().unwrap().len(), 10);
    for f in v["fixtures"].as_array().unwrap() {
        if let Some(b) = f["result"]["brute_force"].as_object() {
            let b = serde_json::to_string(b).unwrap();
            assert_schema("dp_report.schema.json", &b);
        }
    }
}

#[test]
fn config_file_and_environment() {
    let coin = scratch("beta.pinf", "let main (x: real) = ran beta(2, 2)\n");
    let support_len = |c: &mut Command| -> usize {
        let (code, out, err) = run(c);
        assert_eq!(code, 0, "{}", err);
        serde_json::from_str::<Value>(&out).unwrap()["support"].as_array().unwrap().len()
    };
    let cfg = scratch("grid.cfg", "# coarse grid\ngrid_n = 20\n");
    assert_eq!(support_len(bin().arg("--config").arg(&cfg).arg("run").arg(&coin).args(["0", "--json"])), 20);
    assert_eq!(support_len(bin().arg("--config").arg(&cfg).env("PRIVINFER_GRID_N", "30").arg("run").arg(&coin).args(["0", "--json"])), 30);
    assert_eq!(support_len(bin().arg("--config").arg(&cfg).env("PRIVINFER_GRID_N", "30").arg("run").arg(&coin).args(["0", "--json", "--grid", "40"])), 40);
    let bad = scratch("bad.cfg", "grid = 3\n");
    assert_eq!(run(bin().arg("--config").arg(&bad).arg("run").arg(&coin).arg("0")).0, 2);
}
