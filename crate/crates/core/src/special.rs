//! Special functions: log-binomials, binomial tails and the regularized
//! incomplete beta function.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Convergence tolerance of the incomplete-beta continued fraction.
pub const BETA_CF_TOLERANCE: f64 = 1e-14;
/// Iteration cap of the incomplete-beta continued fraction.
pub const BETA_CF_MAX_ITER: u32 = 500;
/// Largest `k` for which the majority tail is summed term by term.
pub const DIRECT_SUM_MAX_K: u32 = 64;

const TINY: f64 = 1e-300;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl core::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln C(n, i)` through log-gamma.
pub fn ln_choose(n: u32, i: u32) -> f64 {
    debug_assert!(i <= n);
    if i == 0 || i == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(i as f64 + 1.0) - ln_gamma((n - i) as f64 + 1.0)
}

/// `P{Bin(n, x) >= m}` by direct summation of the probability mass function
/// in log space, accumulated with compensation.
pub fn binomial_upper_tail(n: u32, m: u32, x: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m > n {
        return 0.0;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_x = libm::log(x);
    let ln_1mx = libm::log1p(-x);
    (m..=n)
        .map(|i| libm::exp(ln_choose(n, i) + i as f64 * ln_x + (n - i) as f64 * ln_1mx))
        .collect::<CompensatedSum>()
        .value()
}

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Uses the continued fraction of the incomplete beta integral evaluated
/// with the modified Lentz method, on whichever side of the mean it
/// converges fastest.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter("beta shape parameters must be positive"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter("argument must lie in [0, 1]"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_continued_fraction(a, b, x)? / a)
    } else {
        Ok(1.0 - front * beta_continued_fraction(b, a, 1.0 - x)? / b)
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let clamp = |v: f64| if libm::fabs(v) < TINY { TINY } else { v };

    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + aa * d);
        c = clamp(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if libm::fabs(delta - 1.0) < BETA_CF_TOLERANCE {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        what: "incomplete beta continued fraction",
        iterations: BETA_CF_MAX_ITER,
    })
}

/// Which evaluation route a [`MajorityTail`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMethod {
    DirectSum,
    IncompleteBeta,
}

/// `P{Bin(k, x) >= (k+1)/2}` for a fixed odd `k`, with the log-binomial
/// coefficients cached so the hot simulation and DP loops only pay for
/// the exponentials.
#[derive(Debug, Clone)]
pub struct MajorityTail {
    k: u32,
    method: TailMethod,
    ln_coeffs: Vec<f64>,
}

impl MajorityTail {
    /// Direct summation for `k <= 64`, incomplete beta above.
    pub fn new(k: u32) -> Self {
        let method = if k <= DIRECT_SUM_MAX_K {
            TailMethod::DirectSum
        } else {
            TailMethod::IncompleteBeta
        };
        Self::with_method(k, method)
    }

    pub fn with_method(k: u32, method: TailMethod) -> Self {
        debug_assert!(k % 2 == 1);
        let m = k.div_ceil(2);
        let ln_coeffs = match method {
            TailMethod::DirectSum => (m..=k).map(|i| ln_choose(k, i)).collect(),
            TailMethod::IncompleteBeta => Vec::new(),
        };
        Self { k, method, ln_coeffs }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn method(&self) -> TailMethod {
        self.method
    }

    /// Evaluates the tail. For `x > 1/2` the complementary tail at `1 - x`
    /// is used, so `eval(1 - x) == 1 - eval(x)` up to the rounding of `1 - x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x == 0.5 {
            return Ok(0.5);
        }
        if x > 0.5 {
            return Ok(1.0 - self.eval_lower_half(1.0 - x)?);
        }
        self.eval_lower_half(x)
    }

    fn eval_lower_half(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        match self.method {
            TailMethod::DirectSum => {
                let m = self.k.div_ceil(2);
                let ln_x = libm::log(x);
                let ln_1mx = libm::log1p(-x);
                let mut sum = CompensatedSum::new();
                for (j, ln_c) in self.ln_coeffs.iter().enumerate() {
                    let i = m + j as u32;
                    sum.add(libm::exp(ln_c + i as f64 * ln_x + (self.k - i) as f64 * ln_1mx));
                }
                Ok(sum.value())
            }
            TailMethod::IncompleteBeta => {
                let a = self.k.div_ceil(2) as f64;
                regularized_incomplete_beta(a, a, x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1.0, 1e-16, 1e-16, -1.0].into_iter().collect();
        assert!((s.value() - 2e-16).abs() < 1e-30);
    }

    #[test]
    fn ln_choose_small_values() {
        assert!((libm::exp(ln_choose(5, 2)) - 10.0).abs() < 1e-12);
        assert!((libm::exp(ln_choose(10, 5)) - 252.0).abs() < 1e-10);
        assert_eq!(ln_choose(7, 0), 0.0);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x and I_x(2, 2) = 3x^2 - 2x^3.
        for &x in &[0.0, 0.1, 0.3, 0.5, 0.77, 1.0] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x).unwrap() - x).abs() < 1e-14);
            let beta22 = 3.0 * x * x - 2.0 * x * x * x;
            assert!((regularized_incomplete_beta(2.0, 2.0, x).unwrap() - beta22).abs() < 1e-14);
        }
    }

    #[test]
    fn incomplete_beta_rejects_bad_input() {
        assert!(regularized_incomplete_beta(0.0, 1.0, 0.5).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn incomplete_beta_matches_statrs() {
        for &(a, b, x) in &[(3.0, 3.0, 0.2), (11.0, 11.0, 0.45), (2.5, 7.0, 0.6), (501.0, 501.0, 0.48)] {
            let ours = regularized_incomplete_beta(a, b, x).unwrap();
            let theirs = statrs::function::beta::beta_reg(a, b, x);
            assert!((ours - theirs).abs() < 1e-11, "a={a} b={b} x={x}: {ours} vs {theirs}");
        }
    }

    #[test]
    fn binomial_tail_edges() {
        assert_eq!(binomial_upper_tail(3, 2, 0.0), 0.0);
        assert_eq!(binomial_upper_tail(3, 2, 1.0), 1.0);
        assert_eq!(binomial_upper_tail(3, 0, 0.4), 1.0);
        assert_eq!(binomial_upper_tail(3, 4, 0.4), 0.0);
        // 3 * 0.01 * 0.9 + 0.001
        assert!((binomial_upper_tail(3, 2, 0.1) - 0.028).abs() < 1e-15);
    }

    #[test]
    fn majority_tail_routes_agree_at_large_k() {
        for &k in &[65u32, 101, 501, 2001] {
            let sum = MajorityTail::with_method(k, TailMethod::DirectSum);
            let beta = MajorityTail::with_method(k, TailMethod::IncompleteBeta);
            for &x in &[0.3, 0.45, 0.49, 0.5, 0.52, 0.7] {
                let (s, b) = (sum.eval(x).unwrap(), beta.eval(x).unwrap());
                assert!((s - b).abs() < 1e-10, "k={k} x={x}: {s} vs {b}");
            }
        }
    }

    #[test]
    fn majority_tail_is_exactly_half_at_half() {
        for &k in &[1u32, 3, 65, 10_001] {
            assert_eq!(MajorityTail::new(k).eval(0.5).unwrap(), 0.5);
        }
    }
}
