use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kdag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdag"))
        .args(args)
        .env_remove("KDAG_SEED")
        .output()
        .expect("kdag runs")
}

fn json_of(args: &[&str]) -> Value {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let out = kdag(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn analyze_low_regime_k3() {
    let v = json_of(&["analyze", "--k", "3", "--p", "0.12"]);
    assert_eq!(v["regime"], "low");
    assert!((v["p_low"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert!((v["p_high"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let b1 = v["beta1"].as_f64().unwrap();
    assert!(b1 > 0.0 && b1 < 0.5);
    assert_eq!(v["beta2"].as_f64().unwrap(), 1.0 - b1);
}

#[test]
fn analyze_high_regime_k1() {
    let v = json_of(&["analyze", "--k", "1", "--p", "0.3"]);
    assert_eq!(v["regime"], "high");
    assert!(v["beta1"].is_null());
}

#[test]
fn analyze_rejects_even_k() {
    let out = kdag(&["analyze", "--k", "4", "--p", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k must be odd"));
}

#[test]
fn missing_parameter_is_a_parameter_error() {
    assert_eq!(kdag(&["analyze", "--k", "3"]).status.code(), Some(2));
}

#[test]
fn exact_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex");
    let v = json_of(&["exact", "--k", "3", "--p", "0.2", "--ell", "2", "--n", "4", "--out", out.to_str().unwrap()]);
    assert!((v["majority_error"].as_f64().unwrap() - 0.176).abs() < 1e-12);
    let csv = read(&out, "distribution.csv");
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "r,prob");
    let p: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!((p[2] - 0.352).abs() < 1e-12 && (p[3] - 0.648).abs() < 1e-12);
    let manifest: Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["config"]["n"], 4);
    assert_eq!(manifest["command"], "exact");
}

#[test]
fn exact_fair_coin_matches_binomial() {
    let v = json_of(&["exact", "--k", "3", "--p", "0.5", "--ell", "2", "--n", "12"]);
    // Red count is 2 + Bin(9, 1/2); red < 6 is an error and red = 6 a tie.
    let c = |i: u64| (0..i).fold(1.0, |a, j| a * (9 - j) as f64 / (j + 1) as f64);
    let expected = ((0..=3).map(c).sum::<f64>() + 0.5 * c(4)) / 512.0;
    assert!((v["majority_error"].as_f64().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn exact_guard_is_a_resource_error() {
    let out = kdag(&["exact", "--k", "3", "--p", "0.2", "--ell", "2", "--n", "60000"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("limit"));
}

#[test]
fn simulate_urn_one_step() {
    let v = json_of(&[
        "simulate", "--mode", "urn", "--k", "3", "--p", "0.2", "--ell", "2", "--n", "4", "--trials", "100000", "--seed", "7",
    ]);
    assert!((v["error_hat"].as_f64().unwrap() - 0.176).abs() < 0.004);
}

#[test]
fn simulate_dag_without_noise_stays_red_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = kdag(&[
            "simulate", "--mode", "dag", "--k", "3", "--p", "0", "--ell", "3", "--n", "100", "--trials", "10",
            "--export-dag", "json", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a");
    let b = run("b");
    let traj = read(&a, "trajectories.csv");
    for row in traj.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[1], f[2], "non-red vertex in {row}");
    }
    for name in ["summary.csv", "summary.json", "trajectories.csv", "dag.json", "manifest.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let args = ["--json", "simulate", "--k", "3", "--p", "0.3", "--n", "50", "--trials", "50"];
    let with_env = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_kdag")).args(args).env("KDAG_SEED", seed).output().unwrap().stdout
    };
    let mut flagged = args.to_vec();
    flagged.extend(["--seed", "99"]);
    assert_eq!(with_env("99"), kdag(&flagged).stdout);
}

#[test]
fn tree_without_noise_is_always_positive() {
    let v = json_of(&["tree", "--p", "0", "--n", "100", "--trials", "10"]);
    assert_eq!(v["delta_positive"].as_f64().unwrap(), 1.0);
}

#[test]
fn tree_dump_instance_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    json_of(&["tree", "--p", "0.2", "--n", "50", "--trials", "5", "--dump-instance", "--out", out.to_str().unwrap()]);
    let inst: Value = serde_json::from_str(&read(&out, "instance.json")).unwrap();
    let delta: i64 = inst["color"].as_array().unwrap().iter().map(|c| c.as_i64().unwrap()).sum();
    assert_eq!(inst["delta"].as_i64().unwrap(), delta);
    assert_eq!(delta, inst["n0"].as_i64().unwrap() + inst["w"].as_i64().unwrap());
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let cfg = dir.path().join("grid.toml");
    std::fs::write(
        &cfg,
        format!(
            "ks = [1, 3]\nps = [0.1, 0.3]\nhorizons = [50]\ntrials = 40\nseed = 3\nout = \"{}\"\n",
            out.display()
        ),
    )
    .unwrap();
    let o = kdag(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out, "sweep.csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,p,ell,horizon,trials,error_hat,ci_lo,ci_hi,mean_R,frac_beta1,frac_half,frac_beta2,frac_uncls,censored_T,seed"
    );
    assert_eq!(lines.count(), 4);
    let manifest: Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["config"]["trials"], 40);
    assert_eq!(manifest["config"]["ks"], serde_json::json!([1, 3]));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("a.toml");
    std::fs::write(&cfg, "k = 3\np = 0.4\n").unwrap();
    let v = json_of(&["--config", cfg.to_str().unwrap(), "analyze", "--p", "0.1"]);
    assert_eq!(v["p"].as_f64().unwrap(), 0.1);
    assert_eq!(v["k"], 3);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("a.toml");
    std::fs::write(&cfg, "k = 3\np = 0.1\nhorizon = 5\n").unwrap();
    assert_eq!(kdag(&["--config", cfg.to_str().unwrap(), "analyze"]).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    assert_eq!(kdag(&["--config", "/nonexistent/kdag.toml", "analyze", "--k", "3", "--p", "0.1"]).status.code(), Some(4));
}
