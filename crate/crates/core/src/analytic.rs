//! Closed-form quantities of the noisy-majority growth process.
//!
//! Conditionally on the current red proportion `t`, each observed parent
//! color is red with probability `f(t) = (1 - 2p) t + p`, so the next
//! vertex is red with probability `P{Bin(k, f(t)) >= (k+1)/2}`. The drift
//! `g(t) = P{Bin(k, f(t)) >= (k+1)/2} - t` controls the red proportion, and
//! its slope at `1/2`, `(1 - 2p) alpha_k - 1`, separates three regimes.

use crate::error::{Error, Result};
use crate::params::{check_k, check_p, check_unit, ModelParams, NoisyMajority};
use crate::special::{self, MajorityTail, TailMethod};

/// Lower end of the bisection bracket for the small fixed point.
pub const BETA_BRACKET_EPS: f64 = 1e-12;
/// Absolute width at which bisection stops.
pub const BETA_TOLERANCE: f64 = 1e-12;

/// `alpha_k = 2^{2-k} sum_{i > k/2} C(k, i) (i - k/2)`.
///
/// The sum telescopes to `k C(k-1, (k-1)/2) / 2^{k-1}`. Central binomials
/// up to `k = 121` fit in a `u128`, which makes small `k` exact to one
/// rounding; larger `k` go through log-gamma.
pub fn alpha(k: u32) -> Result<f64> {
    check_k(k)?;
    let half = (k - 1) / 2;
    if half <= 60 {
        let central = central_binomial(half);
        let numerator = k as u128 * central;
        Ok(libm::ldexp(numerator as f64, -(2 * half as i32)))
    } else {
        let ln = libm::log(k as f64) + special::ln_choose(2 * half, half)
            - 2.0 * half as f64 * core::f64::consts::LN_2;
        Ok(libm::exp(ln))
    }
}

fn central_binomial(m: u32) -> u128 {
    // C(2m, m) = prod_{j=1}^{m} (m + j) / j, exact at every step.
    let mut c: u128 = 1;
    for j in 1..=m as u128 {
        c = c * (m as u128 + j) / j;
    }
    c
}

/// Post-mutation probability that an observed parent color is red.
pub fn flip_map(p: f64, t: f64) -> Result<f64> {
    check_p(p)?;
    check_unit(t)?;
    Ok(flip(p, t))
}

#[inline]
fn flip(p: f64, t: f64) -> f64 {
    (1.0 - 2.0 * p) * t + p
}

/// `P{Bin(k, x) >= (k+1)/2}`: direct summation for `k <= 64`, incomplete
/// beta above.
pub fn majority_tail(k: u32, x: f64) -> Result<f64> {
    check_k(k)?;
    check_unit(x)?;
    MajorityTail::new(k).eval(x)
}

/// Majority tail through the binomial sum regardless of `k`.
pub fn majority_tail_by_sum(k: u32, x: f64) -> Result<f64> {
    check_k(k)?;
    check_unit(x)?;
    MajorityTail::with_method(k, TailMethod::DirectSum).eval(x)
}

/// Majority tail through `I_x((k+1)/2, (k+1)/2)` regardless of `k`.
pub fn majority_tail_by_beta(k: u32, x: f64) -> Result<f64> {
    check_k(k)?;
    check_unit(x)?;
    MajorityTail::with_method(k, TailMethod::IncompleteBeta).eval(x)
}

/// The drift of the red proportion for one vote rule, with the binomial
/// coefficients cached. Simulation and DP loops hold one of these.
#[derive(Debug, Clone)]
pub struct Drift {
    rule: NoisyMajority,
    tail: MajorityTail,
}

impl Drift {
    pub fn new(rule: NoisyMajority) -> Self {
        Self {
            tail: MajorityTail::new(rule.k()),
            rule,
        }
    }

    pub fn rule(&self) -> NoisyMajority {
        self.rule
    }

    /// Probability that the next vertex is red when the red proportion is `t`.
    #[inline]
    pub fn red_probability(&self, t: f64) -> Result<f64> {
        self.tail.eval(flip(self.rule.p(), t))
    }

    /// `g(t)`. Above `1/2` it is evaluated as `-g(1 - t)`, which keeps
    /// the sign of tiny values near `t = 1` that `tail - t` would round away.
    pub fn g(&self, t: f64) -> Result<f64> {
        if t > 0.5 {
            let u = 1.0 - t;
            return Ok(u - self.red_probability(u)?);
        }
        Ok(self.red_probability(t)? - t)
    }
}

/// `g(t) = P{Bin(k, f(t)) >= (k+1)/2} - t`.
pub fn drift_g(rule: &NoisyMajority, t: f64) -> Result<f64> {
    check_unit(t)?;
    Drift::new(*rule).g(t)
}

/// `g'(t) = (1 - 2p) (f(t)(1 - f(t)))^{(k-1)/2} Gamma(k+1) / Gamma((k+1)/2)^2 - 1`.
pub fn drift_g_prime(rule: &NoisyMajority, t: f64) -> Result<f64> {
    check_unit(t)?;
    let k = rule.k() as f64;
    let p = rule.p();
    let f = flip(p, t);
    let variance = f * (1.0 - f);
    if variance == 0.0 {
        // Only reachable at p = 0 and t in {0, 1}, where the density vanishes
        // for k >= 3 and is constant for k = 1.
        return Ok(if rule.k() == 1 { -2.0 * p } else { -1.0 });
    }
    let ln_density = 0.5 * (k - 1.0) * libm::log(variance) + special::ln_gamma(k + 1.0)
        - 2.0 * special::ln_gamma(0.5 * (k + 1.0));
    Ok((1.0 - 2.0 * p) * libm::exp(ln_density) - 1.0)
}

/// `(1/2 - 1/(2 alpha_k), 1/2 - 1/(4 alpha_k))`.
pub fn thresholds(k: u32) -> Result<(f64, f64)> {
    let a = alpha(k)?;
    Ok((0.5 - 1.0 / (2.0 * a), 0.5 - 1.0 / (4.0 * a)))
}

/// Asymptotic behavior of the red proportion and the majority vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `p < p_low`: the proportion converges to one of two fixed points away from 1/2.
    Low,
    /// `p_low <= p < p_high`: balanced colors, majority still beats a coin.
    Intermediate,
    /// `p >= p_high`: the majority vote is asymptotically a coin toss.
    High,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::Intermediate => "intermediate",
            Regime::High => "high",
        }
    }
}

impl core::fmt::Display for Regime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The small fixed point together with a bracket on which `g` changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoints {
    pub beta1: f64,
    pub beta2: f64,
    /// `g(lo) > 0 > g(hi)` and `lo <= beta1 <= hi`.
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub k: u32,
    pub p: f64,
    pub alpha_k: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub regime: Regime,
    /// Present iff the regime is `Low` and `p > 0`.
    pub fixed_points: Option<FixedPoints>,
}

impl RegimeReport {
    pub fn beta1(&self) -> Option<f64> {
        self.fixed_points.map(|fp| fp.beta1)
    }

    pub fn beta2(&self) -> Option<f64> {
        self.fixed_points.map(|fp| fp.beta2)
    }
}

pub fn classify_regime(rule: &NoisyMajority) -> Result<RegimeReport> {
    let alpha_k = alpha(rule.k())?;
    let (p_low, p_high) = thresholds(rule.k())?;
    let p = rule.p();
    let regime = if p < p_low {
        Regime::Low
    } else if p < p_high {
        Regime::Intermediate
    } else {
        Regime::High
    };
    let fixed_points = if regime == Regime::Low && p > 0.0 {
        Some(locate_fixed_points(rule)?)
    } else {
        None
    };
    Ok(RegimeReport {
        k: rule.k(),
        p,
        alpha_k,
        p_low,
        p_high,
        regime,
        fixed_points,
    })
}

/// `(beta1, beta2)`: the zeros of `g` in `(0, 1/2)` and `(1/2, 1)`.
pub fn find_betas(rule: &NoisyMajority) -> Result<(f64, f64)> {
    let fp = locate_fixed_points(rule)?;
    Ok((fp.beta1, fp.beta2))
}

/// Bisection for the zero of `g` in `(0, 1/2)`.
pub fn locate_fixed_points(rule: &NoisyMajority) -> Result<FixedPoints> {
    let (p_low, _) = thresholds(rule.k())?;
    let p = rule.p();
    if p >= p_low {
        return Err(Error::NotLowRegime { p, p_low });
    }
    if p == 0.0 {
        return Err(Error::Degenerate("at p = 0 the small fixed point collapses to 0"));
    }
    let drift = Drift::new(*rule);
    let mut lo = BETA_BRACKET_EPS;
    let mut hi = 0.5 - BETA_BRACKET_EPS;
    if drift.g(lo)? <= 0.0 {
        // For large k and small p the zero lies below 1e-12; fall back to
        // the closed left end, where g(0) = P{Bin(k, p) > k/2} > 0.
        lo = 0.0;
        if drift.g(lo)? <= 0.0 {
            return Err(Error::Degenerate("g(0) underflows; the small fixed point is below double precision"));
        }
    }
    if drift.g(hi)? >= 0.0 {
        return Err(Error::Degenerate("fixed point is indistinguishable from 1/2 in double precision"));
    }
    let mut iterations = 0;
    while hi - lo > BETA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let value = drift.g(mid)?;
        if value > 0.0 {
            lo = mid;
        } else if value < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::NoConvergence {
                what: "fixed-point bisection",
                iterations,
            });
        }
    }
    let beta1 = 0.5 * (lo + hi);
    Ok(FixedPoints {
        beta1,
        beta2: 1.0 - beta1,
        bracket: (lo, hi),
    })
}

/// `sqrt(8 ln 2 / pi)`: the constant under which the fixed-point bound holds.
pub const BETA1_BOUND_CONSTANT: f64 = 1.328_564_940_535_920_1;

/// `exp(-k (1 - 2p)^2 / 8)` when `p <= 1/2 - C/(2 alpha_k)`, an upper bound
/// on the small fixed point; `None` when the condition fails.
pub fn beta1_upper_bound(rule: &NoisyMajority) -> Result<Option<f64>> {
    let a = alpha(rule.k())?;
    let p = rule.p();
    if p > 0.5 - BETA1_BOUND_CONSTANT / (2.0 * a) {
        return Ok(None);
    }
    let k = rule.k() as f64;
    let s = 1.0 - 2.0 * p;
    Ok(Some(libm::exp(-k * s * s / 8.0)))
}

/// Universal lower bound on the majority-vote error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorLowerBound {
    /// `P{Beta((k+1)/2, (k+1)/2) >= 1 - 1/k}`.
    pub h_k: f64,
    /// `h_k^{2 ell - k} / 2`, valid for every `p` in `[0, 1/2]` and `n >= 2 ell`.
    pub bound: f64,
}

pub fn error_lower_bound(params: &ModelParams) -> Result<ErrorLowerBound> {
    let k = params.k();
    let ell = params.ell();
    if k < 3 {
        return Err(Error::NotApplicable("the lower bound needs k >= 3"));
    }
    if ell >= k {
        return Err(Error::NotApplicable("the lower bound needs ell < k"));
    }
    let h_k = beta_tail_h(k)?;
    let bound = 0.5 * libm::pow(h_k, (2 * ell - k) as f64);
    Ok(ErrorLowerBound { h_k, bound })
}

/// `h_k`, evaluated as `I_{1/k}(a, a)` by the symmetry of `Beta(a, a)`
/// to avoid the cancellation in `1 - I_{1 - 1/k}(a, a)`.
pub fn beta_tail_h(k: u32) -> Result<f64> {
    check_k(k)?;
    let a = k.div_ceil(2) as f64;
    special::regularized_incomplete_beta(a, a, 1.0 / k as f64)
}
