use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slotplace")).args(args).output().expect("binary runs")
}

fn solve(alg: &str, dir: &Path) -> (Output, serde_json::Value) {
    let metrics = dir.join(format!("{alg}.json"));
    let placement = dir.join(format!("{alg}-placement.json"));
    let out = run(&[
        "solve",
        fixture("pathology4.json").to_str().unwrap(),
        "--algorithm",
        alg,
        "--metrics",
        metrics.to_str().unwrap(),
        "--placement",
        placement.to_str().unwrap(),
    ]);
    let value = std::fs::read_to_string(&metrics).map(|t| serde_json::from_str(&t).unwrap()).unwrap_or_default();
    (out, value)
}

#[test]
fn pathology_rewards_by_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let (out, m) = solve("greedy", dir.path());
    assert!(out.status.success());
    assert_eq!(m["reward"], 2.0);
    let (out, m) = solve("brute", dir.path());
    assert!(out.status.success());
    assert_eq!(m["reward"], 4.0);
    let (out, m) = solve("rsa", dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = m["reward"].as_f64().unwrap();
    assert!((0.632..=4.0).contains(&r), "{r}");
    assert!((m["r_hat"].as_f64().unwrap() - 4.0).abs() < 1e-6);
    assert_eq!(m["guarantee_met"], true);
    assert_eq!(m["algorithm"], "rsa");
}

#[test]
fn written_placements_verify() {
    let dir = tempfile::tempdir().unwrap();
    for alg in ["rsa", "csa", "sa2", "greedy", "lp-round", "brute"] {
        let (out, _) = solve(alg, dir.path());
        assert!(out.status.success(), "{alg}: {}", String::from_utf8_lossy(&out.stderr));
        let placement = dir.path().join(format!("{alg}-placement.json"));
        let v = run(&["verify", fixture("pathology4.json").to_str().unwrap(), placement.to_str().unwrap()]);
        assert!(v.status.success(), "{alg}");
        let report: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
        assert_eq!(report["feasible"], true);
    }
}

#[test]
fn overfull_placement_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let placement = dir.path().join("p.json");
    std::fs::write(&placement, r#"{"0": [0], "1": [0]}"#).unwrap();
    let v = run(&["verify", fixture("pathology4.json").to_str().unwrap(), placement.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
}

#[test]
fn sa1_refuses_when_a_service_fills_a_node() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = solve("sa1", dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta_min"));
}

#[test]
fn input_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["generate", "--kappa", "0", "-o", o]).status.code(), Some(3));
    assert_eq!(run(&["generate", "--kappa", "lots", "-o", o]).status.code(), Some(3));
    assert_eq!(run(&["solve", "missing.json"]).status.code(), Some(3));
    assert_eq!(run(&["solve", fixture("pathology4.json").to_str().unwrap(), "-a", "simplex"]).status.code(), Some(3));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn oracle_budget_exceeded_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("big.json");
    let o = inst.to_str().unwrap();
    assert!(run(&["generate", "--services", "40", "--nodes", "3", "--users", "60", "--seed", "1", "-o", o])
        .status
        .success());
    let out = run(&["solve", o, "--algorithm", "brute"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn generate_defaults_and_seed_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert!(run(&["generate", "--seed", "9", "-o", p.to_str().unwrap()]).status.success());
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["services"].as_array().unwrap().len(), 1000);
    assert_eq!(v["nodes"].as_array().unwrap().len(), 10);
    assert_eq!(v["gsp_users"].as_array().unwrap().len(), 1000);
    assert_eq!(v["provenance"]["generator"]["seed"], 9);
    assert_eq!(v["provenance"]["generator"]["kappa"], 1.3);
}

#[test]
fn convert_then_solve_matches_original() {
    let dir = tempfile::tempdir().unwrap();
    let spsc = dir.path().join("spsc.json");
    assert!(run(&["convert", fixture("pathology4.json").to_str().unwrap(), "-o", spsc.to_str().unwrap()])
        .status
        .success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&spsc).unwrap()).unwrap();
    assert_eq!(v["spsc_users"].as_array().unwrap().len(), 5);
    let out = run(&["solve", spsc.to_str().unwrap(), "--algorithm", "brute"]);
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["reward"], 4.0);
    // Converting twice is refused.
    let again = dir.path().join("again.json");
    assert_eq!(run(&["convert", spsc.to_str().unwrap(), "-o", again.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn sweep_rows_and_rerun_identity() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let conf = fixture("sweep.conf");
    assert!(run(&["sweep", conf.to_str().unwrap(), "-o", a.to_str().unwrap()]).status.success());
    assert!(run(&["sweep", conf.to_str().unwrap(), "-o", b.to_str().unwrap(), "--workers", "1"]).status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("row_type,param,value,seed,algorithm,"));
    assert_eq!(lines.iter().filter(|l| l.starts_with("run,")).count(), 12);
    assert_eq!(lines.iter().filter(|l| l.starts_with("mean,")).count(), 6);
}

#[test]
fn broken_sweep_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "vary = n_users\nvalues = 10\nseeds = 1\nalgorithms = quantum\n").unwrap();
    assert_eq!(run(&["sweep", conf.to_str().unwrap()]).status.code(), Some(3));
}
