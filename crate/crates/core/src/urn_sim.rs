//! The red-count process: an urn that, at each step, draws `k` balls with
//! replacement, recolors each independently with probability `p`, and adds
//! one ball of the majority color.
//!
//! The `k` draws, flips and vote are collapsed into one Bernoulli trial
//! with success probability `P{Bin(k, f(red/n)) >= (k+1)/2}`, which has the
//! same law. Counts are integers throughout so ties are detected exactly.

use alloc::vec::Vec;

use rand::Rng;

use crate::analytic::Drift;
use crate::error::{Error, Result};
use crate::params::{Color, ModelParams};
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UrnState {
    /// Total number of balls (vertices).
    pub n: u64,
    /// Red balls among them.
    pub red: u64,
}

impl UrnState {
    pub fn initial(params: &ModelParams) -> Self {
        Self {
            n: params.k() as u64,
            red: params.ell() as u64,
        }
    }

    pub fn proportion(&self) -> f64 {
        self.red as f64 / self.n as f64
    }

    pub fn blue(&self) -> u64 {
        self.n - self.red
    }
}

/// Majority color of `red` out of `n`; an exact tie is settled by a fair coin.
pub fn majority_color<R: Rng + ?Sized>(red: u64, n: u64, rng: &mut R) -> Color {
    let twice = 2 * red;
    if twice > n {
        Color::Red
    } else if twice < n {
        Color::Blue
    } else if rng.random::<bool>() {
        Color::Red
    } else {
        Color::Blue
    }
}

/// What [`Urn::run`] keeps of the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Record {
    Full,
    /// Every `stride`-th step counted from `n = k`, plus the final state.
    Thinned(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    /// `(n, red)` pairs starting at `(k, ell)`.
    pub values: Vec<(u64, u64)>,
    pub stream: Option<RandomStream>,
}

impl Trajectory {
    pub fn last(&self) -> UrnState {
        let &(n, red) = self.values.last().expect("a trajectory always holds its initial state");
        UrnState { n, red }
    }

    pub fn proportions(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|&(n, r)| r as f64 / n as f64)
    }
}

/// The urn for one parameter set, with the majority tail coefficients cached.
#[derive(Debug, Clone)]
pub struct Urn {
    params: ModelParams,
    drift: Drift,
}

impl Urn {
    pub fn new(params: ModelParams) -> Self {
        Self {
            drift: Drift::new(params.rule()),
            params,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn drift(&self) -> &Drift {
        &self.drift
    }

    /// Probability that the ball added in state `state` is red.
    #[inline]
    pub fn red_probability(&self, state: UrnState) -> Result<f64> {
        self.drift.red_probability(state.red as f64 / state.n as f64)
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, state: UrnState, rng: &mut R) -> Result<UrnState> {
        let q = self.red_probability(state)?;
        let red = (rng.random::<f64>() < q) as u64;
        Ok(UrnState {
            n: state.n + 1,
            red: state.red + red,
        })
    }

    pub fn run<R: Rng + ?Sized>(&self, horizon: u64, rng: &mut R, record: Record) -> Result<Trajectory> {
        let k = self.params.k() as u64;
        if horizon < k {
            return Err(Error::InvalidHorizon { n: horizon, k: self.params.k() });
        }
        let stride = match record {
            Record::Full => 1,
            Record::Thinned(0) => return Err(Error::InvalidParameter("thinning stride must be positive")),
            Record::Thinned(s) => s,
        };
        let mut state = UrnState::initial(&self.params);
        let mut values = Vec::with_capacity(((horizon - k) / stride + 2) as usize);
        values.push((state.n, state.red));
        while state.n < horizon {
            state = self.step(state, rng)?;
            if (state.n - k).is_multiple_of(stride) || state.n == horizon {
                values.push((state.n, state.red));
            }
        }
        Ok(Trajectory {
            params: self.params,
            values,
            stream: None,
        })
    }

    /// First `n <= horizon` at which the majority color (ties by coin) is
    /// not red; `None` when censored at the horizon.
    pub fn first_flip_time<R: Rng + ?Sized>(&self, horizon: u64, rng: &mut R) -> Result<Option<u64>> {
        let mut state = UrnState::initial(&self.params);
        while state.n < horizon {
            state = self.step(state, rng)?;
            if majority_color(state.red, state.n, rng) == Color::Blue {
                return Ok(Some(state.n));
            }
        }
        Ok(None)
    }
}

/// One step of the urn.
pub fn step<R: Rng + ?Sized>(state: UrnState, params: &ModelParams, rng: &mut R) -> Result<UrnState> {
    if state.n < params.k() as u64 || state.red > state.n {
        return Err(Error::InvalidParameter("urn state must satisfy k <= n and red <= n"));
    }
    Urn::new(*params).step(state, rng)
}

/// Runs the urn from `(k, ell)` to `horizon` on a reproducible stream.
pub fn run(params: &ModelParams, horizon: u64, stream: RandomStream, record: Record) -> Result<Trajectory> {
    let mut traj = Urn::new(*params).run(horizon, &mut stream.rng(), record)?;
    traj.stream = Some(stream);
    Ok(traj)
}

pub fn first_flip_time(params: &ModelParams, horizon: u64, stream: RandomStream) -> Result<Option<u64>> {
    Urn::new(*params).first_flip_time(horizon, &mut stream.rng())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{drift_g, find_betas};

    fn params(k: u32, p: f64, ell: u32) -> ModelParams {
        ModelParams::new(k, p, ell).unwrap()
    }

    #[test]
    fn no_mutation_all_red_stays_red() {
        let mut rng = RandomStream::new(1, 1).rng();
        let s = step(UrnState { n: 3, red: 3 }, &params(3, 0.0, 3), &mut rng).unwrap();
        assert_eq!(s, UrnState { n: 4, red: 4 });
    }

    #[test]
    fn one_step_red_frequency() {
        let urn = Urn::new(params(3, 0.2, 2));
        assert!((urn.red_probability(UrnState { n: 3, red: 2 }).unwrap() - 0.648).abs() < 1e-15);
        let mut rng = RandomStream::new(2, 0).rng();
        let trials = 100_000;
        let reds = (0..trials)
            .filter(|_| urn.step(UrnState { n: 3, red: 2 }, &mut rng).unwrap().red == 3)
            .count();
        assert!((reds as f64 / trials as f64 - 0.648).abs() < 0.005);
    }

    #[test]
    fn fair_coin_at_half_mutation() {
        let urn = Urn::new(params(5, 0.5, 4));
        for red in 0..=10 {
            assert_eq!(urn.red_probability(UrnState { n: 10, red }).unwrap(), 0.5);
        }
    }

    #[test]
    fn horizon_equal_to_k_is_a_single_entry() {
        let t = run(&params(3, 0.3, 2), 3, RandomStream::new(0, 0), Record::Full).unwrap();
        assert_eq!(t.values, [(3, 2)]);
        assert!(run(&params(3, 0.3, 2), 2, RandomStream::new(0, 0), Record::Full).is_err());
    }

    #[test]
    fn tree_without_mutation_keeps_root_color() {
        let t = run(&params(1, 0.0, 1), 1000, RandomStream::new(0, 0), Record::Full).unwrap();
        assert!(t.values.iter().all(|&(n, r)| n == r));
        assert_eq!(t.values.len(), 1000);
    }

    #[test]
    fn increments_are_zero_or_one() {
        let t = run(&params(5, 0.3, 3), 5000, RandomStream::new(4, 2), Record::Full).unwrap();
        for w in t.values.windows(2) {
            assert_eq!(w[1].0, w[0].0 + 1);
            assert!(w[1].1 == w[0].1 || w[1].1 == w[0].1 + 1);
        }
    }

    #[test]
    fn thinned_recording_keeps_stride_and_final() {
        let t = run(&params(3, 0.3, 2), 3 + 25, RandomStream::new(4, 2), Record::Thinned(10)).unwrap();
        let ns: std::vec::Vec<u64> = t.values.iter().map(|v| v.0).collect();
        assert_eq!(ns, [3, 13, 23, 28]);
        let full = run(&params(3, 0.3, 2), 28, RandomStream::new(4, 2), Record::Full).unwrap();
        assert_eq!(full.last(), t.last());
        assert!(run(&params(3, 0.3, 2), 28, RandomStream::new(4, 2), Record::Thinned(0)).is_err());
    }

    #[test]
    fn flip_time_examples() {
        let p = params(3, 0.0, 3);
        assert_eq!(first_flip_time(&p, 10_000, RandomStream::new(0, 0)).unwrap(), None);
        let p = params(3, 0.2, 2);
        assert_eq!(first_flip_time(&p, 3, RandomStream::new(0, 0)).unwrap(), None);
        let trials = 100_000u64;
        let hits = (0..trials)
            .filter(|&t| first_flip_time(&p, 4, RandomStream::new(8, t)).unwrap() == Some(4))
            .count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.176).abs() < 4.0 * libm::sqrt(0.176 * 0.824 / trials as f64), "{freq}");
    }

    #[test]
    fn one_step_mean_increment_matches_drift() {
        let p = params(3, 0.2, 2);
        let urn = Urn::new(p);
        let mut rng = RandomStream::new(5, 5).rng();
        let state = UrnState { n: 30, red: 20 };
        let trials = 200_000;
        let reds = (0..trials).filter(|_| urn.step(state, &mut rng).unwrap().red > state.red).count();
        // (n + 1) E[R_{n+1} - R_n] = P{red} - R_n = g(R_n).
        let empirical = reds as f64 / trials as f64 - state.proportion();
        let g = drift_g(&p.rule(), state.proportion()).unwrap();
        let q = g + state.proportion();
        let se = libm::sqrt(q * (1.0 - q) / trials as f64);
        assert!((empirical - g).abs() < 4.0 * se);
    }

    #[test]
    fn low_regime_settles_near_upper_fixed_point() {
        let p = params(3, 0.05, 2);
        let (_, beta2) = find_betas(&p.rule()).unwrap();
        let near = (0..50u64)
            .filter(|&s| {
                let t = run(&p, 100_000, RandomStream::new(77, s), Record::Thinned(1000)).unwrap();
                (t.last().proportion() - beta2).abs() < 0.05
            })
            .count();
        assert!(near >= 40, "{near} of 50 near beta2");
    }
}
