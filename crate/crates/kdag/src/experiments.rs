//! Monte Carlo sweeps over `(k, p, ell, horizon)` cells.
//!
//! Trial `t` of cell `c` always draws from stream `(seed, c * 2^32 + t)`,
//! and per-trial outcomes are reduced in trial order, so results do not
//! depend on how rayon schedules the work.

use std::time::{Duration, Instant};

use kdag_core::analytic::{classify_regime, Regime, RegimeReport};
use kdag_core::dag_sim::{grow_with, KDag};
use kdag_core::exact_dist::forward_with_limit;
use kdag_core::rng::StreamRng;
use kdag_core::stats::{wilson_95, ProportionEstimate};
use kdag_core::tree_decomp::{tree_trial, TreeOutcome, TreeScratch, TreeTally};
use kdag_core::urn_sim::{majority_color, Trajectory, Urn, UrnState};
use kdag_core::{Color, ModelParams, RandomStream};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Largest horizon for urn trials.
pub const MAX_URN_HORIZON: u64 = 10_000_000;
/// Largest horizon for explicit DAG trials.
pub const MAX_DAG_HORIZON: u64 = 1_000_000;
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.1;
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("resource guard: {0}")]
    Resource(String),
    #[error(transparent)]
    Model(#[from] kdag_core::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Urn,
    Dag,
}

impl std::str::FromStr for SimMode {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "urn" => Ok(SimMode::Urn),
            "dag" => Ok(SimMode::Dag),
            _ => Err(ExperimentError::InvalidSpec(format!("unknown mode `{s}` (expected urn or dag)"))),
        }
    }
}

/// Settings shared by every trial of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialSettings {
    pub mode: SimMode,
    /// Record every `stride`-th state for the limit classification window.
    pub stride: u64,
    pub window_fraction: f64,
    pub delta: f64,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            mode: SimMode::Urn,
            stride: 10,
            window_fraction: DEFAULT_WINDOW_FRACTION,
            delta: DEFAULT_DELTA,
        }
    }
}

impl TrialSettings {
    fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(ExperimentError::InvalidSpec("stride must be positive".into()));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(ExperimentError::InvalidSpec("window fraction must lie in (0, 1]".into()));
        }
        if !(self.delta > 0.0) {
            return Err(ExperimentError::InvalidSpec("delta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub ks: Vec<u32>,
    pub ps: Vec<f64>,
    /// Initial red counts; empty means the smallest majority `k/2 + 1` for each `k`.
    pub ells: Vec<u32>,
    pub horizons: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub settings: TrialSettings,
    /// Also compute the exact error of each cell when its horizon is at most this.
    pub exact_max_horizon: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: u64,
    pub params: ModelParams,
    pub horizon: u64,
}

impl SweepSpec {
    /// Cells in `k, ell, p, horizon` order; every combination must be valid.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        if self.trials == 0 {
            return Err(ExperimentError::InvalidSpec("trials must be at least 1".into()));
        }
        if self.trials > 1 << 32 {
            return Err(ExperimentError::InvalidSpec("at most 2^32 trials per cell".into()));
        }
        if self.ks.is_empty() || self.ps.is_empty() || self.horizons.is_empty() {
            return Err(ExperimentError::InvalidSpec("k, p and horizon axes need at least one value".into()));
        }
        self.settings.validate()?;
        let mut cells = Vec::new();
        for &k in &self.ks {
            let ells = if self.ells.is_empty() { vec![k / 2 + 1] } else { self.ells.clone() };
            for ell in ells {
                for &p in &self.ps {
                    let params = ModelParams::new(k, p, ell).map_err(|e| {
                        ExperimentError::InvalidSpec(format!("cell k={k} p={p} ell={ell}: {e}"))
                    })?;
                    for &horizon in &self.horizons {
                        check_horizon(&params, horizon, self.settings.mode)?;
                        cells.push(Cell {
                            index: cells.len() as u64,
                            params,
                            horizon,
                        });
                    }
                }
            }
        }
        Ok(cells)
    }
}

pub fn check_horizon(params: &ModelParams, horizon: u64, mode: SimMode) -> Result<()> {
    if horizon < params.k() as u64 {
        return Err(kdag_core::Error::InvalidHorizon { n: horizon, k: params.k() }.into());
    }
    let limit = match mode {
        SimMode::Urn => MAX_URN_HORIZON,
        SimMode::Dag => MAX_DAG_HORIZON,
    };
    if horizon > limit {
        return Err(ExperimentError::Resource(format!(
            "{mode:?} horizon {horizon} exceeds the limit of {limit}"
        )));
    }
    Ok(())
}

/// Where a trajectory ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitClass {
    Beta1,
    Half,
    Beta2,
    Unclassified,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LimitFractions {
    pub beta1: f64,
    pub half: f64,
    pub beta2: f64,
    pub unclassified: f64,
}

/// Candidate limits `(beta1, 1/2, beta2)` of the red proportion. In the low
/// regime at `p = 0` the zeros of the drift are `0, 1/2, 1`.
pub fn limit_targets(report: &RegimeReport) -> (Option<f64>, f64, Option<f64>) {
    match (report.regime, report.fixed_points) {
        (Regime::Low, Some(fp)) => (Some(fp.beta1), 0.5, Some(fp.beta2)),
        (Regime::Low, None) => (Some(0.0), 0.5, Some(1.0)),
        _ => (None, 0.5, None),
    }
}

/// Assigns `value` to the nearest target within `delta`.
pub fn classify_value(value: f64, report: &RegimeReport, delta: f64) -> LimitClass {
    let (b1, half, b2) = limit_targets(report);
    let mut best = (LimitClass::Unclassified, f64::INFINITY);
    for (class, target) in [(LimitClass::Beta1, b1), (LimitClass::Half, Some(half)), (LimitClass::Beta2, b2)] {
        if let Some(t) = target {
            let d = (value - t).abs();
            if d < delta && d < best.1 {
                best = (class, d);
            }
        }
    }
    best.0
}

/// Number of points in the classification window out of `count` recorded.
pub fn window_len(count: usize, window_fraction: f64) -> usize {
    ((window_fraction * count as f64).ceil() as usize).clamp(1, count.max(1))
}

/// Mean proportion over the last `window_fraction` of the recorded points.
pub fn window_mean(trajectory: &Trajectory, window_fraction: f64) -> f64 {
    let len = trajectory.values.len();
    let w = window_len(len, window_fraction);
    trajectory.proportions().skip(len - w).sum::<f64>() / w as f64
}

fn fractions(classes: impl Iterator<Item = LimitClass>) -> LimitFractions {
    let mut counts = [0u64; 4];
    let mut total = 0u64;
    for c in classes {
        total += 1;
        counts[match c {
            LimitClass::Beta1 => 0,
            LimitClass::Half => 1,
            LimitClass::Beta2 => 2,
            LimitClass::Unclassified => 3,
        }] += 1;
    }
    if total == 0 {
        return LimitFractions::default();
    }
    let t = total as f64;
    LimitFractions {
        beta1: counts[0] as f64 / t,
        half: counts[1] as f64 / t,
        beta2: counts[2] as f64 / t,
        unclassified: counts[3] as f64 / t,
    }
}

/// Fractions of trajectories whose window mean sits within `delta` of
/// `beta1`, `1/2` or `beta2`.
pub fn classify_limits(
    trajectories: &[Trajectory],
    report: &RegimeReport,
    window_fraction: f64,
    delta: f64,
) -> LimitFractions {
    fractions(
        trajectories
            .iter()
            .map(|t| classify_value(window_mean(t, window_fraction), report, delta)),
    )
}

/// Outcome of one simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub final_state: UrnState,
    pub majority: Color,
    pub flip_time: Option<u64>,
    pub window_mean: f64,
}

/// Tracks the first flip time, the classification window and optionally
/// the thinned path while states arrive one at a time.
struct Observer<'a> {
    k: u64,
    horizon: u64,
    stride: u64,
    window_start: usize,
    seen: usize,
    window_sum: f64,
    flip_time: Option<u64>,
    path: Option<&'a mut Vec<(u64, u64)>>,
}

impl<'a> Observer<'a> {
    fn new(k: u64, horizon: u64, settings: &TrialSettings, path: Option<&'a mut Vec<(u64, u64)>>) -> Self {
        let steps = horizon - k;
        let count = (steps / settings.stride + 1 + !steps.is_multiple_of(settings.stride) as u64) as usize;
        Self {
            k,
            horizon,
            stride: settings.stride,
            window_start: count - window_len(count, settings.window_fraction),
            seen: 0,
            window_sum: 0.0,
            flip_time: None,
            path,
        }
    }

    fn visit(&mut self, state: UrnState, rng: &mut StreamRng) {
        if state.n > self.k && self.flip_time.is_none() && majority_color(state.red, state.n, rng) == Color::Blue {
            self.flip_time = Some(state.n);
        }
        if (state.n - self.k).is_multiple_of(self.stride) || state.n == self.horizon {
            if self.seen >= self.window_start {
                self.window_sum += state.proportion();
            }
            self.seen += 1;
            if let Some(path) = self.path.as_deref_mut() {
                path.push((state.n, state.red));
            }
        }
    }

    fn finish(self, final_state: UrnState, rng: &mut StreamRng) -> TrialOutcome {
        let w = self.seen - self.window_start;
        TrialOutcome {
            final_state,
            majority: majority_color(final_state.red, final_state.n, rng),
            flip_time: self.flip_time,
            window_mean: self.window_sum / w as f64,
        }
    }
}

/// Runs one trial of `params` to `horizon` on `stream`. When `path` is
/// given it receives the thinned `(n, red)` path.
pub fn run_trial(
    urn: &Urn,
    horizon: u64,
    settings: &TrialSettings,
    stream: RandomStream,
    path: Option<&mut Vec<(u64, u64)>>,
) -> Result<TrialOutcome> {
    let params = *urn.params();
    check_horizon(&params, horizon, settings.mode)?;
    let mut rng = stream.rng();
    let k = params.k() as u64;
    let mut obs = Observer::new(k, horizon, settings, path);
    let mut state = UrnState::initial(&params);
    match settings.mode {
        SimMode::Urn => {
            obs.visit(state, &mut rng);
            while state.n < horizon {
                state = urn.step(state, &mut rng)?;
                obs.visit(state, &mut rng);
            }
        }
        SimMode::Dag => {
            let dag = grow_with(params, horizon, &mut rng)?;
            for &(n, red) in &dag.red_count_path() {
                state = UrnState { n, red };
                obs.visit(state, &mut rng);
            }
        }
    }
    Ok(obs.finish(state, &mut rng))
}

/// Grows the DAG of trial `trial` of a cell, for export.
pub fn grow_trial_dag(params: ModelParams, horizon: u64, stream: RandomStream) -> Result<KDag> {
    check_horizon(&params, horizon, SimMode::Dag)?;
    Ok(kdag_core::dag_sim::grow(params, horizon, stream)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub k: u32,
    pub p: f64,
    pub ell: u32,
    pub horizon: u64,
    pub trials: u64,
    #[serde(serialize_with = "serialize_estimate")]
    pub error: ProportionEstimate,
    pub mean_r: f64,
    pub limits: LimitFractions,
    pub censored_t: f64,
    pub seed: u64,
    pub regime: &'static str,
    pub exact_error: Option<f64>,
    #[serde(skip)]
    pub runtime: Duration,
}

fn serialize_estimate<S: serde::Serializer>(e: &ProportionEstimate, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("ProportionEstimate", 5)?;
    st.serialize_field("successes", &e.successes)?;
    st.serialize_field("trials", &e.trials)?;
    st.serialize_field("estimate", &e.estimate)?;
    st.serialize_field("ci_lo", &e.ci_lo)?;
    st.serialize_field("ci_hi", &e.ci_hi)?;
    st.end()
}

/// Runs all trials of one cell and reduces them in trial order.
pub fn run_cell(
    cell: &Cell,
    trials: u64,
    seed: u64,
    settings: &TrialSettings,
    exact_max_horizon: Option<u64>,
) -> Result<CellResult> {
    let start = Instant::now();
    let report = classify_regime(&cell.params.rule())?;
    let urn = Urn::new(cell.params);
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(&urn, cell.horizon, settings, RandomStream::for_trial(seed, cell.index, t), None))
        .collect::<Result<_>>()?;
    let exact_error = match exact_max_horizon {
        Some(limit) if cell.horizon <= limit => {
            Some(forward_with_limit(&cell.params, cell.horizon, limit)?.majority_error())
        }
        _ => None,
    };
    Ok(summarize(cell, trials, seed, &report, settings, &outcomes, exact_error, start.elapsed()))
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    cell: &Cell,
    trials: u64,
    seed: u64,
    report: &RegimeReport,
    settings: &TrialSettings,
    outcomes: &[TrialOutcome],
    exact_error: Option<f64>,
    runtime: Duration,
) -> CellResult {
    let errors = outcomes.iter().filter(|o| o.majority != Color::Red).count() as u64;
    let censored = outcomes.iter().filter(|o| o.flip_time.is_none()).count();
    let mean_r = outcomes.iter().map(|o| o.final_state.proportion()).sum::<f64>() / outcomes.len() as f64;
    CellResult {
        k: cell.params.k(),
        p: cell.params.p(),
        ell: cell.params.ell(),
        horizon: cell.horizon,
        trials,
        error: wilson_95(errors, trials),
        mean_r,
        limits: fractions(outcomes.iter().map(|o| classify_value(o.window_mean, report, settings.delta))),
        censored_t: censored as f64 / outcomes.len() as f64,
        seed,
        regime: report.regime.as_str(),
        exact_error,
        runtime,
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CellResult>> {
    let cells = spec.cells()?;
    cells
        .iter()
        .map(|cell| {
            let r = run_cell(cell, spec.trials, spec.seed, &spec.settings, spec.exact_max_horizon)?;
            log::info!(
                "cell {} k={} p={} ell={} n={}: error {} in {:.2?}",
                cell.index,
                r.k,
                r.p,
                r.ell,
                r.horizon,
                r.error.estimate,
                r.runtime
            );
            Ok(r)
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "k,p,ell,horizon,trials,error_hat,ci_lo,ci_hi,mean_R,frac_beta1,frac_half,frac_beta2,frac_uncls,censored_T,seed";

pub fn sweep_csv(results: &[CellResult]) -> String {
    let mut out = String::with_capacity(64 * (results.len() + 1));
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.k,
            r.p,
            r.ell,
            r.horizon,
            r.trials,
            r.error.estimate,
            r.error.ci_lo,
            r.error.ci_hi,
            r.mean_r,
            r.limits.beta1,
            r.limits.half,
            r.limits.beta2,
            r.limits.unclassified,
            r.censored_t,
            r.seed
        ));
    }
    out
}

/// Parallel tree trials with the same streams as
/// [`kdag_core::tree_decomp::estimate_delta_positive`], hence the same tally.
pub fn tree_experiment(p: f64, n: usize, trials: u64, seed: u64) -> Result<TreeTally> {
    if n == 0 || trials == 0 {
        return Err(ExperimentError::InvalidSpec("tree size and trials must be positive".into()));
    }
    kdag_core::NoisyMajority::new(1, p)?;
    let outcomes: Vec<TreeOutcome> = (0..trials)
        .into_par_iter()
        .map_init(TreeScratch::default, |scratch, t| {
            tree_trial(p, n, RandomStream::for_trial(seed, 0, t), scratch)
        })
        .collect::<std::result::Result<_, _>>()?;
    let mut tally = TreeTally::default();
    outcomes.iter().for_each(|o| tally.record(o));
    Ok(tally)
}

/// One row of the empirical drift check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftRow {
    pub n: u64,
    pub red: u64,
    pub t: f64,
    /// `(n + 1)` times the mean one-step increment of the red proportion.
    pub empirical: f64,
    pub g: f64,
    pub z: f64,
}

/// Simulates one urn step `trials` times from each state and compares the
/// scaled mean increment with `g(red / n)`.
pub fn drift_check_states(
    params: &ModelParams,
    states: &[UrnState],
    trials: u64,
    seed: u64,
) -> Result<Vec<DriftRow>> {
    let urn = Urn::new(*params);
    states
        .par_iter()
        .enumerate()
        .map(|(i, &state)| {
            if state.n < params.k() as u64 || state.red > state.n {
                return Err(ExperimentError::InvalidSpec(format!("invalid urn state {state:?}")));
            }
            let mut rng = RandomStream::for_trial(seed, i as u64, 0).rng();
            let q = urn.red_probability(state)?;
            let reds = (0..trials).filter(|_| rng.random::<f64>() < q).count() as f64;
            let t = state.proportion();
            // (n + 1)(R_{n+1} - R_n) = 1{red} - R_n.
            let empirical = reds / trials as f64 - t;
            let g = q - t;
            let se = (q * (1.0 - q) / trials as f64).sqrt();
            let diff = empirical - g;
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            Ok(DriftRow { n: state.n, red: state.red, t, empirical, g, z })
        })
        .collect()
}

/// [`drift_check_states`] on `n_points` evenly spaced red counts at
/// `n = max(k, 1000)`.
pub fn drift_empirical_check(params: &ModelParams, n_points: usize, trials: u64, seed: u64) -> Result<Vec<DriftRow>> {
    if n_points < 2 {
        return Err(ExperimentError::InvalidSpec("need at least two drift points".into()));
    }
    let n = (params.k() as u64).max(1000);
    let states: Vec<UrnState> = (0..n_points)
        .map(|i| UrnState {
            n,
            red: ((i as f64 / (n_points - 1) as f64) * n as f64).round() as u64,
        })
        .collect();
    drift_check_states(params, &states, trials, seed)
}
