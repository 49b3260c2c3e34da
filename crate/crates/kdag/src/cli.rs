//! The `kdag` command line.
//!
//! Every subcommand resolves its parameters as flag, then config file,
//! then default, and writes a manifest with the resolved values next to
//! any files it produces. Exit codes: 0 success, 1 internal error,
//! 2 parameter error, 3 resource guard, 4 I/O failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kdag_core::analytic::{beta1_upper_bound, classify_regime, drift_g_prime, error_lower_bound};
use kdag_core::exact_dist::{exact_flip_time_mass_with_limit, forward_with_limit};
use kdag_core::tree_decomp::{decompose, grow_marked_tree};
use kdag_core::urn_sim::Urn;
use kdag_core::{ModelParams, NoisyMajority, RandomStream};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::experiments::{
    self, run_cell, run_trial, sweep_csv, ExperimentError, SimMode, SweepSpec, TrialSettings,
};
use crate::export::{export_edges, vertex_colors_csv, ExportError, ExportFormat};
use crate::formats;
use crate::manifest::Manifest;
use crate::stats::sign_symmetry;

/// Default horizon limit of `kdag exact`.
pub const DEFAULT_EXACT_MAX_N: u64 = 50_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Param(String),
    #[error("{0}")]
    Resource(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Param(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<kdag_core::Error> for CliError {
    fn from(e: kdag_core::Error) -> Self {
        use kdag_core::Error as E;
        match e {
            E::ResourceLimit { .. } => CliError::Resource(e.to_string()),
            E::NoConvergence { .. } | E::MassNotConserved { .. } | E::Internal(_) => CliError::Internal(e.to_string()),
            _ => CliError::Param(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidSpec(m) => CliError::Param(m),
            ExperimentError::Resource(m) => CliError::Resource(m),
            ExperimentError::Model(m) => m.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Param(e.to_string()),
        }
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Model(m) => m.into(),
            other => CliError::Param(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "kdag", version, about = "Broadcasting on uniform random recursive k-DAGs")]
pub struct Cli {
    /// Flat key = value config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print the summary as JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regime, thresholds, fixed points and bounds for (k, p).
    Analyze(AnalyzeArgs),
    /// Monte Carlo runs of the urn or the explicit DAG.
    Simulate(SimulateArgs),
    /// Exact law of the red count by dynamic programming.
    Exact(ExactArgs),
    /// Parameter sweep over a (k, ell, p, horizon) grid.
    Sweep(SweepArgs),
    /// Marked recursive-tree decomposition for k = 1.
    Tree(TreeArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Initial red count for the error lower bound (default: k/2 + 1).
    #[arg(long)]
    pub ell: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `urn` or `dag`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub ell: Option<u32>,
    /// Horizon (number of vertices at the end).
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, env = "KDAG_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stride: Option<u64>,
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of leading trials whose thinned paths are written.
    #[arg(long)]
    pub trajectories: Option<u64>,
    /// Export the DAG of trial 0 as csv, dot or json (dag mode).
    #[arg(long)]
    pub export_dag: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub ell: Option<u32>,
    #[arg(long)]
    pub n: Option<u64>,
    /// Refuse horizons above this (at most 100000).
    #[arg(long)]
    pub max_n: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated odd k values.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub ps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub ells: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<u64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, env = "KDAG_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub stride: Option<u64>,
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Also compute the exact error for cells with horizon up to this.
    #[arg(long)]
    pub exact_max_n: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    #[arg(long)]
    pub p: Option<f64>,
    /// Non-root vertices per tree.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, env = "KDAG_SEED")]
    pub seed: Option<u64>,
    /// Write the decomposition of trial 0 as JSON.
    #[arg(long)]
    pub dump_instance: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Param(format!("missing required parameter `{name}` (flag --{name} or config key)")))
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(dir: &Path, name: &str, bytes: impl AsRef<[u8]>, outputs: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    outputs.push(name.to_string());
    Ok(())
}

fn print_summary(out: &mut dyn Write, json: bool, summary: &serde_json::Value) -> Result<()> {
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(summary).expect("summary serializes"))?;
    } else if let Some(map) = summary.as_object() {
        for (key, value) in map {
            writeln!(out, "{key}: {value}")?;
        }
    }
    Ok(())
}

/// Runs one parsed command line, writing the summary to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match &cli.command {
        Command::Analyze(a) => analyze(a, &config, cli.json, out),
        Command::Simulate(a) => simulate(a, &config, cli.json, out),
        Command::Exact(a) => exact(a, &config, cli.json, out),
        Command::Sweep(a) => sweep(a, &config, cli.json, out),
        Command::Tree(a) => tree(a, &config, cli.json, out),
    }
}

#[derive(Debug, Serialize)]
struct AnalyzeConfig {
    k: u32,
    p: f64,
    ell: Option<u32>,
}

fn analyze(args: &AnalyzeArgs, config: &Config, json: bool, out: &mut dyn Write) -> Result<()> {
    config.check_keys(&["k", "p", "ell", "out"])?;
    let resolved = AnalyzeConfig {
        k: required(config.pick(args.k, "k")?, "k")?,
        p: required(config.pick(args.p, "p")?, "p")?,
        ell: config.pick(args.ell, "ell")?,
    };
    let rule = NoisyMajority::new(resolved.k, resolved.p)?;
    let report = classify_regime(&rule)?;
    let lower_bound = if resolved.k >= 3 {
        let ell = resolved.ell.unwrap_or(resolved.k / 2 + 1);
        match error_lower_bound(&ModelParams::new(resolved.k, resolved.p, ell)?) {
            Ok(lb) => json!({ "ell": ell, "h_k": lb.h_k, "bound": lb.bound }),
            Err(kdag_core::Error::NotApplicable(why)) => json!({ "ell": ell, "not_applicable": why }),
            Err(e) => return Err(e.into()),
        }
    } else {
        serde_json::Value::Null
    };
    let summary = json!({
        "k": report.k,
        "p": report.p,
        "alpha_k": report.alpha_k,
        "p_low": report.p_low,
        "p_high": report.p_high,
        "regime": report.regime.as_str(),
        "drift_slope_at_half": drift_g_prime(&rule, 0.5)?,
        "beta1": report.beta1(),
        "beta2": report.beta2(),
        "beta1_bracket": report.fixed_points.map(|fp| [fp.bracket.0, fp.bracket.1]),
        "beta1_upper_bound": beta1_upper_bound(&rule)?,
        "error_lower_bound": lower_bound,
    });
    print_summary(out, json, &summary)?;
    if let Some(dir) = config.pick(args.out.clone(), "out")? {
        prepare_out(&dir)?;
        let mut manifest = Manifest::new("analyze", &resolved);
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        write_file(&dir, "report.json", text, &mut manifest.outputs)?;
        manifest.write(&dir)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulateConfig {
    mode: SimMode,
    k: u32,
    p: f64,
    ell: u32,
    n: u64,
    trials: u64,
    seed: u64,
    stride: u64,
    window: f64,
    delta: f64,
    trajectories: u64,
    export_dag: Option<String>,
}

fn simulate(args: &SimulateArgs, config: &Config, json: bool, out: &mut dyn Write) -> Result<()> {
    config.check_keys(&[
        "mode", "k", "p", "ell", "n", "trials", "seed", "stride", "window", "delta", "trajectories", "export_dag", "out",
    ])?;
    let k = required(config.pick(args.k, "k")?, "k")?;
    let mode: SimMode = config.pick(args.mode.clone(), "mode")?.unwrap_or_else(|| "urn".into()).parse()?;
    let trials = config.pick(args.trials, "trials")?.unwrap_or(1000);
    let defaults = TrialSettings::default();
    let resolved = SimulateConfig {
        mode,
        k,
        p: required(config.pick(args.p, "p")?, "p")?,
        ell: config.pick(args.ell, "ell")?.unwrap_or(k / 2 + 1),
        n: required(config.pick(args.n, "n")?, "n")?,
        trials,
        seed: config.pick(args.seed, "seed")?.unwrap_or(0),
        stride: config.pick(args.stride, "stride")?.unwrap_or(defaults.stride),
        window: config.pick(args.window, "window")?.unwrap_or(defaults.window_fraction),
        delta: config.pick(args.delta, "delta")?.unwrap_or(defaults.delta),
        trajectories: config.pick(args.trajectories, "trajectories")?.unwrap_or(trials.min(10)),
        export_dag: config.pick(args.export_dag.clone(), "export_dag")?,
    };
    let export_format = resolved
        .export_dag
        .as_deref()
        .map(str::parse::<ExportFormat>)
        .transpose()?;
    if export_format.is_some() && mode != SimMode::Dag {
        return Err(CliError::Param("--export-dag needs --mode dag".into()));
    }
    let params = ModelParams::new(resolved.k, resolved.p, resolved.ell)?;
    let settings = TrialSettings {
        mode,
        stride: resolved.stride,
        window_fraction: resolved.window,
        delta: resolved.delta,
    };
    let spec = SweepSpec {
        ks: vec![resolved.k],
        ps: vec![resolved.p],
        ells: vec![resolved.ell],
        horizons: vec![resolved.n],
        trials: resolved.trials,
        seed: resolved.seed,
        settings,
        exact_max_horizon: None,
    };
    let cell = spec.cells()?[0];
    let result = run_cell(&cell, resolved.trials, resolved.seed, &settings, None)?;
    let summary = json!({
        "mode": mode,
        "k": result.k,
        "p": result.p,
        "ell": result.ell,
        "horizon": result.horizon,
        "trials": result.trials,
        "regime": result.regime,
        "error_hat": result.error.estimate,
        "ci_lo": result.error.ci_lo,
        "ci_hi": result.error.ci_hi,
        "mean_R": result.mean_r,
        "frac_beta1": result.limits.beta1,
        "frac_half": result.limits.half,
        "frac_beta2": result.limits.beta2,
        "frac_uncls": result.limits.unclassified,
        "censored_T": result.censored_t,
        "seed": result.seed,
    });
    print_summary(out, json, &summary)?;

    if let Some(dir) = config.pick(args.out.clone(), "out")? {
        prepare_out(&dir)?;
        let mut manifest = Manifest::new("simulate", &resolved);
        write_file(&dir, "summary.csv", sweep_csv(std::slice::from_ref(&result)), &mut manifest.outputs)?;
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        write_file(&dir, "summary.json", text, &mut manifest.outputs)?;

        let urn = Urn::new(params);
        let mut paths = Vec::new();
        for t in 0..resolved.trajectories.min(resolved.trials) {
            let mut path = Vec::new();
            run_trial(&urn, resolved.n, &settings, RandomStream::for_trial(resolved.seed, cell.index, t), Some(&mut path))?;
            paths.push((t, path));
        }
        let csv = formats::trajectories_csv(paths.iter().map(|(t, p)| (*t, p.as_slice())));
        write_file(&dir, "trajectories.csv", csv, &mut manifest.outputs)?;

        if let Some(format) = export_format {
            let dag = experiments::grow_trial_dag(params, resolved.n, RandomStream::for_trial(resolved.seed, cell.index, 0))?;
            let name = format!("dag.{}", format.extension());
            write_file(&dir, &name, export_edges(&dag, format)?, &mut manifest.outputs)?;
            if format == ExportFormat::EdgeListCsv {
                write_file(&dir, "dag_colors.csv", vertex_colors_csv(&dag), &mut manifest.outputs)?;
            }
        }
        manifest.write(&dir)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ExactConfig {
    k: u32,
    p: f64,
    ell: u32,
    n: u64,
    max_n: u64,
}

fn exact(args: &ExactArgs, config: &Config, json: bool, out: &mut dyn Write) -> Result<()> {
    config.check_keys(&["k", "p", "ell", "n", "max_n", "out"])?;
    let k = required(config.pick(args.k, "k")?, "k")?;
    let resolved = ExactConfig {
        k,
        p: required(config.pick(args.p, "p")?, "p")?,
        ell: config.pick(args.ell, "ell")?.unwrap_or(k / 2 + 1),
        n: required(config.pick(args.n, "n")?, "n")?,
        max_n: config.pick(args.max_n, "max_n")?.unwrap_or(DEFAULT_EXACT_MAX_N),
    };
    let params = ModelParams::new(resolved.k, resolved.p, resolved.ell)?;
    let dist = forward_with_limit(&params, resolved.n, resolved.max_n)?;
    let flip = exact_flip_time_mass_with_limit(&params, resolved.n, resolved.max_n)?;
    let lower_bound = match error_lower_bound(&params) {
        Ok(lb) => Some(lb.bound),
        Err(kdag_core::Error::NotApplicable(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let support: Vec<serde_json::Value> = dist
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(r, &p)| json!([r, p]))
        .collect();
    let mut summary = json!({
        "k": resolved.k,
        "p": resolved.p,
        "ell": resolved.ell,
        "n": resolved.n,
        "majority_error": dist.majority_error(),
        "mean_proportion": dist.mean_proportion(),
        "flip_time_censored": flip.censored,
        "error_lower_bound": lower_bound,
    });
    if support.len() <= 32 {
        summary["distribution"] = serde_json::Value::Array(support);
    }
    print_summary(out, json, &summary)?;
    if let Some(dir) = config.pick(args.out.clone(), "out")? {
        prepare_out(&dir)?;
        let mut manifest = Manifest::new("exact", &resolved);
        write_file(&dir, "distribution.csv", formats::distribution_csv(&dist), &mut manifest.outputs)?;
        write_file(&dir, "distribution.json", formats::distribution_json(&dist), &mut manifest.outputs)?;
        write_file(&dir, "flip_time.csv", formats::flip_time_csv(&flip), &mut manifest.outputs)?;
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        write_file(&dir, "summary.json", text, &mut manifest.outputs)?;
        manifest.write(&dir)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepConfig {
    #[serde(flatten)]
    spec: SweepSpec,
    out: PathBuf,
}

fn sweep(args: &SweepArgs, config: &Config, json: bool, out: &mut dyn Write) -> Result<()> {
    config.check_keys(&[
        "ks", "ps", "ells", "horizons", "trials", "seed", "mode", "stride", "window", "delta", "exact_max_n", "out",
    ])?;
    let defaults = TrialSettings::default();
    let mode: SimMode = config.pick(args.mode.clone(), "mode")?.unwrap_or_else(|| "urn".into()).parse()?;
    let spec = SweepSpec {
        ks: required(config.pick(args.ks.clone(), "ks")?, "ks")?,
        ps: required(config.pick(args.ps.clone(), "ps")?, "ps")?,
        ells: config.pick(args.ells.clone(), "ells")?.unwrap_or_default(),
        horizons: required(config.pick(args.horizons.clone(), "horizons")?, "horizons")?,
        trials: config.pick(args.trials, "trials")?.unwrap_or(1000),
        seed: config.pick(args.seed, "seed")?.unwrap_or(0),
        settings: TrialSettings {
            mode,
            stride: config.pick(args.stride, "stride")?.unwrap_or(defaults.stride),
            window_fraction: config.pick(args.window, "window")?.unwrap_or(defaults.window_fraction),
            delta: config.pick(args.delta, "delta")?.unwrap_or(defaults.delta),
        },
        exact_max_horizon: config.pick(args.exact_max_n, "exact_max_n")?,
    };
    let resolved = SweepConfig {
        spec,
        out: config.pick(args.out.clone(), "out")?.unwrap_or_else(|| PathBuf::from("sweep_out")),
    };
    let results = experiments::run_sweep(&resolved.spec)?;
    let dir = &resolved.out;
    prepare_out(dir)?;
    let mut manifest = Manifest::new("sweep", &resolved);
    write_file(dir, "sweep.csv", sweep_csv(&results), &mut manifest.outputs)?;
    let text = serde_json::to_string_pretty(&results).expect("results serialize") + "\n";
    write_file(dir, "sweep.json", text, &mut manifest.outputs)?;
    manifest.write(dir)?;
    let summary = json!({
        "cells": results.len(),
        "csv": dir.join("sweep.csv"),
        "json": dir.join("sweep.json"),
    });
    print_summary(out, json, &summary)
}

#[derive(Debug, Serialize)]
struct TreeConfig {
    p: f64,
    n: usize,
    trials: u64,
    seed: u64,
    dump_instance: bool,
}

fn tree(args: &TreeArgs, config: &Config, json: bool, out: &mut dyn Write) -> Result<()> {
    config.check_keys(&["p", "n", "trials", "seed", "dump_instance", "out"])?;
    let resolved = TreeConfig {
        p: required(config.pick(args.p, "p")?, "p")?,
        n: required(config.pick(args.n, "n")?, "n")?,
        trials: config.pick(args.trials, "trials")?.unwrap_or(1000),
        seed: config.pick(args.seed, "seed")?.unwrap_or(0),
        dump_instance: args.dump_instance || config.get("dump_instance")?.unwrap_or(false),
    };
    let tally = experiments::tree_experiment(resolved.p, resolved.n, resolved.trials, resolved.seed)?;
    let est = tally.estimate();
    let symmetry = sign_symmetry(tally.w_positive, tally.w_negative);
    let mean_n0 = tally.n0_sum as f64 / tally.trials as f64;
    let summary = json!({
        "p": resolved.p,
        "n": resolved.n,
        "trials": tally.trials,
        "delta_positive": est.direct.estimate,
        "ci_lo": est.direct.ci_lo,
        "ci_hi": est.direct.ci_hi,
        "via_symmetry": est.via_symmetry,
        "via_symmetry_ci": [est.via_symmetry_ci.0, est.via_symmetry_ci.1],
        "identity_violations": 0,
        "w_positive": tally.w_positive,
        "w_negative": tally.w_negative,
        "w_sign_p_value": symmetry.p_value,
        "mean_n0": mean_n0,
        "n0_mean_lower_bound": (-1.0f64).exp() * ((resolved.n + 1) as f64).powf(1.0 - 2.0 * resolved.p),
        "seed": resolved.seed,
    });
    print_summary(out, json, &summary)?;
    if let Some(dir) = config.pick(args.out.clone(), "out")? {
        prepare_out(&dir)?;
        let mut manifest = Manifest::new("tree", &resolved);
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        write_file(&dir, "summary.json", text, &mut manifest.outputs)?;
        if resolved.dump_instance {
            let mut rng = RandomStream::for_trial(resolved.seed, 0, 0).rng();
            let instance = grow_marked_tree(resolved.p, resolved.n, &mut rng)?;
            let d = decompose(&instance)?;
            let doc = json!({
                "p": resolved.p,
                "n": resolved.n,
                "parent": instance.parent,
                "marked": instance.marked,
                "coin": instance.coin,
                "color": instance.color,
                "sizes": d.sizes,
                "delta": d.delta,
                "n0": d.n0(),
                "w": d.w,
            });
            let text = serde_json::to_string_pretty(&doc).expect("instance serializes") + "\n";
            write_file(&dir, "instance.json", text, &mut manifest.outputs)?;
        }
        manifest.write(&dir)?;
    }
    Ok(())
}
