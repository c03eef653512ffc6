use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_econorder");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn economy(n: u64, pi: Option<u64>, regime: &str, levels: &str, degeneracies: Option<&str>) -> String {
    let mut s = format!("[economy]\nn_firms = {n}\nregime = \"{regime}\"\n");
    if let Some(pi) = pi {
        s += &format!("total_revenue = {pi}\n");
    }
    s += &format!("[grid]\nlevels = {levels}\n");
    if let Some(g) = degeneracies {
        s += &format!("degeneracies = {g}\n");
    }
    s
}

fn run_cmd(dir: &TempDir, cmd: &str, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir.path(), &format!("{cmd}.toml"), config);
    let out = dir.path().join(format!("out_{cmd}"));
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (run(&args), out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn enumerate_two_distinguishable_firms() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_cmd(&dir, "enumerate", &economy(2, None, "mon", "[1, 2]", None), &[]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("orders.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "occupancy,multiplicity,probability_num,probability_den,probability_float");
    assert_eq!(&lines[1..], ["\"(1,1)\",2,1,2,0.5", "\"(0,2)\",1,1,4,0.25", "\"(2,0)\",1,1,4,0.25"]);
    let s = json(&out.join("spontaneous.json"));
    assert_eq!(s["order"], serde_json::json!([1, 1]));
    assert_eq!(s["total_outcomes"], "4");
    assert_eq!(s["enumerated_outcomes"], 4);
}

#[test]
fn enumerate_with_revenue_keeps_one_order() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_cmd(&dir, "enumerate", &economy(2, Some(3), "mon", "[1, 2]", None), &[]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("orders.csv")).unwrap();
    assert_eq!(csv.lines().skip(1).collect::<Vec<_>>(), ["\"(1,1)\",2,1,1,1"]);
}

#[test]
fn enumerate_single_firm() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_cmd(&dir, "enumerate", &economy(1, Some(2), "per", "[1, 2, 3]", Some("[2, 2, 2]")), &[]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("orders.csv")).unwrap();
    assert_eq!(csv.lines().skip(1).collect::<Vec<_>>(), ["\"(0,1,0)\",2,1,1,1"]);
}

#[test]
fn enumerate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = economy(4, Some(9), "per", "[1, 2, 3]", Some("[2, 1, 3]"));
    let (_, a) = run_cmd(&dir, "enumerate", &cfg, &[]);
    let first = fs::read(a.join("orders.csv")).unwrap();
    let (_, b) = run_cmd(&dir, "enumerate", &cfg, &[]);
    assert_eq!(first, fs::read(b.join("orders.csv")).unwrap());
}

#[test]
fn infeasible_and_capped_exit_codes() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run_cmd(&dir, "enumerate", &economy(2, Some(5), "mon", "[1, 2]", None), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "infeasible");

    let capped = economy(200, None, "mon", "[1, 2, 3, 4, 5]", None) + "[caps]\noutcomes = 1000\n";
    let (o, _) = run_cmd(&dir, "enumerate", &capped, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"]["kind"], "cap_exceeded");
}

#[test]
fn solve_two_levels_is_constraint_determined() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_cmd(&dir, "solve", &economy(10, Some(14), "mon", "[1, 2]", None), &[]);
    assert!(o.status.success());
    let s = json(&out.join("solution.json"));
    let occ = s["solution"]["occupancy"].as_array().unwrap();
    assert!((occ[0].as_f64().unwrap() - 6.0).abs() < 1e-9);
    assert!((occ[1].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert!(s["macro"]["identity"]["best_sign"].is_i64());
    let csv = fs::read_to_string(out.join("occupancy.csv")).unwrap();
    assert!(csv.starts_with("level,revenue,degeneracy,occupancy\n1,1,1,"));
}

#[test]
fn solve_flags_condensation() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_cmd(&dir, "solve", &economy(100, Some(105), "per", "[1, 2, 3]", None), &[]);
    assert!(o.status.success());
    let s = json(&out.join("solution.json"));
    assert_eq!(s["condensation"]["condensed"], true);
}

#[test]
fn solve_boundary_reports_degenerate_occupancy() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_cmd(&dir, "solve", &economy(5, Some(5), "per", "[1, 2, 3]", Some("[4, 4, 4]")), &[]);
    assert!(o.status.success());
    let s = json(&out.join("solution.json"));
    assert_eq!(s["solution"]["boundary"], "lowest");
    assert_eq!(s["solution"]["occupancy"], serde_json::json!([5.0, 0.0, 0.0]));
    assert!(s["macro"].is_null());
}

#[test]
fn sample_matches_exact_catalog() {
    let dir = TempDir::new().unwrap();
    let cfg = economy(2, None, "mon", "[1, 2]", None) + "[run]\ndraws = 20000\n";
    let (o, out) = run_cmd(&dir, "sample", &cfg, &["--seed", "3", "--seed", "4"]);
    assert!(o.status.success());
    let s = json(&out.join("sample.json"));
    let runs = s["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for r in runs {
        assert_eq!(r["sampler"], "exact");
        assert!(r["chi_square"]["p_value"].as_f64().unwrap() >= 0.001);
    }
    let csv = fs::read_to_string(out.join("frequencies.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn sample_markov_mode_reports_acceptance() {
    let dir = TempDir::new().unwrap();
    let cfg = economy(6, Some(12), "per", "[1, 2, 3]", Some("[2, 2, 2]")) + "[run]\ndraws = 2000\n";
    let (o, out) = run_cmd(&dir, "sample", &cfg, &["--mode", "markov"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("sample.json"));
    assert_eq!(s["runs"][0]["sampler"], "markov");
    assert!(s["runs"][0]["acceptance_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn sample_outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = economy(6, Some(12), "per", "[1, 2, 3]", Some("[2, 2, 2]")) + "[run]\ndraws = 5000\n";
    let (_, a) = run_cmd(&dir, "sample", &cfg, &["--mode", "markov", "--seed", "9"]);
    let first = (fs::read(a.join("frequencies.csv")).unwrap(), fs::read(a.join("sample.json")).unwrap());
    let (_, b) = run_cmd(&dir, "sample", &cfg, &["--mode", "markov", "--seed", "9"]);
    assert_eq!(first.0, fs::read(b.join("frequencies.csv")).unwrap());
    assert_eq!(first.1, fs::read(b.join("sample.json")).unwrap());
}

#[test]
fn macro_writes_named_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = economy(32, Some(58), "per", "[1, 2, 3]", Some("[64, 64, 64]"));
    let (o, out) = run_cmd(&dir, "macro", &cfg, &["--lambda", "2", "--labor", "2", "--capital", "3", "--exponents", "0.3", "0.7", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("macro.json"));
    for key in ["mu", "theta", "lambda", "alpha", "beta", "T", "lnOmega", "identity_residual", "best_sign"] {
        assert!(!m[key].is_null(), "missing {key}");
    }
    assert_eq!(m["lambda"], 2.0);
    let t = m["T"].as_f64().unwrap();
    assert!((t - 2.0 * m["lnOmega"].as_f64().unwrap()).abs() < 1e-9);
    let expected = t * 2f64.powf(0.3) * 3f64.powf(0.7);
    assert!((m["production"]["output"].as_f64().unwrap() - expected).abs() < 1e-9 * expected);
}

fn write_samples(dir: &Path, values: &[f64]) -> PathBuf {
    let p = dir.join("samples.csv");
    let text: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    fs::write(&p, text.join("\n")).unwrap();
    p
}

#[test]
fn fit_recovers_exponential_data() {
    let dir = TempDir::new().unwrap();
    let data = econorder::empirics::synthetic_exponential(20_000, 0.0, 10.0, 1).unwrap();
    let path = write_samples(dir.path(), &data.values);
    let out = dir.path().join("fit");
    let o = run(&["fit", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = json(&out.join("fit.json"));
    let t = f["boltzmann"]["temperature"].as_f64().unwrap();
    assert!((t - 10.0).abs() / 10.0 < 0.05, "T = {t}");
    assert_eq!(f["preferred"], "boltzmann");
    let bins = fs::read_to_string(out.join("bins.csv")).unwrap();
    assert!(bins.starts_with("model,center,observed,fitted\n"));
}

#[test]
fn fit_rejects_degenerate_data() {
    let dir = TempDir::new().unwrap();
    let path = write_samples(dir.path(), &[3.0; 50]);
    let out = dir.path().join("fit");
    let o = run(&["fit", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "domain");
}

#[test]
fn fit_value_count_format() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("vc.csv");
    fs::write(&p, "# value,count\n1.0,3\n2.5,0\n").unwrap();
    let o = run(&["fit", p.to_str().unwrap(), "--format", "value-count", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "parse");
    assert!(e["error"]["message"].as_str().unwrap().contains("line 3"));
}

#[test]
fn check_passes_then_fails_with_fault() {
    let dir = TempDir::new().unwrap();
    let cfg = economy(2, None, "mon", "[1, 2]", None);
    let (o, out) = run_cmd(&dir, "check", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["check.json", "check_oracle.json", "check_identity.json", "check_convergence.json"] {
        assert!(out.join(name).exists(), "{name}");
    }

    let (o, _) = run_cmd(&dir, "check", &cfg, &["--inject-fault", "1,1"]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    let failures = e["error"]["failures"].as_array().unwrap();
    assert!(failures.iter().any(|f| f.as_str().unwrap().contains("order (1,1)")));
}

#[test]
fn config_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (economy(2, None, "mon", "[2, 1]", None), "grid.levels[1]"),
        (economy(2, None, "bad", "[1, 2]", None), "economy.regime"),
        (economy(2, None, "mon", "[1, 2]", Some("[1]")), "grid.degeneracies"),
        (economy(2, None, "mon", "[1, 2]", None) + "[run]\nlambda = 0.0\n", "run.lambda"),
        (economy(2, None, "mon", "[1, 2]", None) + "[extra]\nx = 1\n", "extra"),
    ];
    for (text, field) in cases {
        let (o, _) = run_cmd(&dir, "enumerate", &text, &[]);
        assert_eq!(o.status.code(), Some(1), "{field}");
        let e = stderr_json(&o);
        assert_eq!(e["error"]["kind"], "config");
        assert_eq!(e["error"]["field"], field);
    }
}

#[test]
fn usage_errors_are_structured() {
    let o = run(&["enumerate", "--regime", "xyz"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");
}
