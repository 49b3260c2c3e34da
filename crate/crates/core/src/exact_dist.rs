//! Exact law of the red count by forward dynamic programming over the
//! Markov chain `red -> red + 1` with probability
//! `q(red, n) = P{Bin(k, f(red/n)) >= (k+1)/2}`.
//!
//! The work is `O(n^2)` kernel evaluations and `O(n)` memory.

use alloc::vec::Vec;

use crate::analytic::Drift;
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Hard limit on the horizon accepted by the DP.
pub const MAX_EXACT_HORIZON: u64 = 100_000;
/// Horizons above this log a warning about run time.
pub const WARN_EXACT_HORIZON: u64 = 20_000;
/// Allowed deviation of the total mass from 1.
pub const MASS_TOLERANCE: f64 = 1e-9;

const MASS_CHECK_EVERY: u64 = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub params: ModelParams,
    pub n: u64,
    /// `probs[r] = P{red count = r at time n}`, length `n + 1`.
    pub probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `P{majority at time n is not red}`, ties weighted by one half.
    pub fn majority_error(&self) -> f64 {
        let n = self.n as usize;
        let mut err: f64 = self.probs.iter().take(n.div_ceil(2)).sum();
        if n.is_multiple_of(2) {
            err += 0.5 * self.probs[n / 2];
        }
        err
    }

    pub fn mean_proportion(&self) -> f64 {
        let n = self.n as f64;
        self.probs.iter().enumerate().map(|(r, &pr)| pr * r as f64 / n).sum()
    }
}

fn check_horizon(params: &ModelParams, n: u64, limit: u64) -> Result<()> {
    if n < params.k() as u64 {
        return Err(Error::InvalidHorizon { n, k: params.k() });
    }
    if n > limit {
        return Err(Error::ResourceLimit { n, limit });
    }
    if n > WARN_EXACT_HORIZON {
        log::warn!("exact DP at n = {n} costs O(n^2) = {:.1e} kernel evaluations", (n as f64) * (n as f64));
    }
    Ok(())
}

fn check_mass(total: f64) -> Result<()> {
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::MassNotConserved { total });
    }
    Ok(())
}

/// Law of the red count at time `n`, starting from `ell` red at time `k`.
pub fn forward(params: &ModelParams, n: u64) -> Result<ExactDistribution> {
    forward_with_limit(params, n, MAX_EXACT_HORIZON)
}

/// [`forward`] with a caller-chosen horizon limit (never above [`MAX_EXACT_HORIZON`]).
pub fn forward_with_limit(params: &ModelParams, n: u64, limit: u64) -> Result<ExactDistribution> {
    check_horizon(params, n, limit.min(MAX_EXACT_HORIZON))?;
    let drift = Drift::new(params.rule());
    let k = params.k() as u64;
    let ell = params.ell() as usize;
    let mut probs = alloc::vec![0.0; n as usize + 1];
    probs[ell] = 1.0;
    for m in k..n {
        // Support at time m is [ell, ell + (m - k)]; sweep downward so each
        // cell is read before it receives mass from below.
        let hi = ell + (m - k) as usize;
        for r in (ell..=hi).rev() {
            let mass = probs[r];
            if mass == 0.0 {
                continue;
            }
            let q = drift.red_probability(r as f64 / m as f64)?;
            probs[r + 1] += mass * q;
            probs[r] = mass * (1.0 - q);
        }
        if (m - k + 1).is_multiple_of(MASS_CHECK_EVERY) {
            check_mass(probs.iter().sum())?;
        }
    }
    check_mass(probs.iter().sum())?;
    Ok(ExactDistribution {
        params: *params,
        n,
        probs,
    })
}

/// `R^maj(n, p)`: probability that the majority vote at time `n` is wrong.
pub fn exact_majority_error(params: &ModelParams, n: u64) -> Result<f64> {
    Ok(forward(params, n)?.majority_error())
}

/// Law of the first time the majority color stops being red.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipTimeMass {
    /// Time of `mass[0]`, always `k + 1`.
    pub first: u64,
    /// `mass[i] = P{T = first + i}`.
    pub mass: Vec<f64>,
    /// `P{T > n}`.
    pub censored: f64,
}

impl FlipTimeMass {
    pub fn at(&self, t: u64) -> f64 {
        t.checked_sub(self.first)
            .and_then(|i| self.mass.get(i as usize).copied())
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.censored
    }
}

/// DP on the chain killed at the first majority flip. A tie at even time
/// kills half of the mass sitting on it, mirroring the coin of the
/// majority rule.
pub fn exact_flip_time_mass(params: &ModelParams, n: u64) -> Result<FlipTimeMass> {
    exact_flip_time_mass_with_limit(params, n, MAX_EXACT_HORIZON)
}

pub fn exact_flip_time_mass_with_limit(params: &ModelParams, n: u64, limit: u64) -> Result<FlipTimeMass> {
    check_horizon(params, n, limit.min(MAX_EXACT_HORIZON))?;
    let drift = Drift::new(params.rule());
    let k = params.k() as u64;
    let ell = params.ell() as usize;
    let mut alive = alloc::vec![0.0; n as usize + 1];
    alive[ell] = 1.0;
    let mut mass = Vec::with_capacity((n - k) as usize);
    for m in k..n {
        let hi = ell + (m - k) as usize;
        for r in (ell..=hi).rev() {
            let w = alive[r];
            if w == 0.0 {
                continue;
            }
            let q = drift.red_probability(r as f64 / m as f64)?;
            alive[r + 1] += w * q;
            alive[r] = w * (1.0 - q);
        }
        // Alive states at time m have 2r > m, so after one step only
        // r = m/2 ... at time m + 1 can be a tie (2r = m + 1) and nothing
        // drops strictly below a tie.
        let t = m + 1;
        let mut killed = 0.0;
        if t % 2 == 0 {
            let r = (t / 2) as usize;
            if r >= ell {
                let half = 0.5 * alive[r];
                killed += half;
                alive[r] -= half;
            }
        }
        for r in ell..=hi + 1 {
            if 2 * r as u64 >= t {
                break;
            }
            killed += alive[r];
            alive[r] = 0.0;
        }
        mass.push(killed);
    }
    let censored: f64 = alive.iter().sum();
    let out = FlipTimeMass {
        first: k + 1,
        mass,
        censored,
    };
    check_mass(out.total())?;
    Ok(out)
}
