//! Chi-square checks used by the Monte Carlo comparisons.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn upper_tail(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .map(|d| d.sf(statistic))
        .unwrap_or(f64::NAN)
}

/// Tests `P{positive} = P{negative}` from the two sign counts.
pub fn sign_symmetry(positive: u64, negative: u64) -> ChiSquare {
    let total = (positive + negative) as f64;
    if total == 0.0 {
        return ChiSquare { statistic: 0.0, dof: 1, p_value: 1.0 };
    }
    let diff = positive as f64 - negative as f64;
    let statistic = diff * diff / total;
    ChiSquare {
        statistic,
        dof: 1,
        p_value: upper_tail(statistic, 1),
    }
}

/// Two-sample homogeneity test on histograms over the same bins. Bins
/// empty in both samples are dropped.
pub fn two_sample(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len(), "histograms must share bins");
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let (na, nb) = (na as f64, nb as f64);
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        bins += 1;
        let pooled = (x + y) as f64 / (na + nb);
        let ea = pooled * na;
        let eb = pooled * nb;
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = bins.saturating_sub(1);
    ChiSquare {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof),
    }
}

/// Largest `|observed - expected| / standard error` over bins with
/// positive expected probability, for `trials` multinomial draws.
pub fn max_bin_z(counts: &[u64], probs: &[f64], trials: u64) -> f64 {
    let n = trials as f64;
    counts
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0 && p < 1.0)
        .map(|(&c, &p)| ((c as f64 / n) - p).abs() / (p * (1.0 - p) / n).sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_signs_pass() {
        let t = sign_symmetry(5000, 5000);
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lopsided_signs_fail() {
        assert!(sign_symmetry(6000, 4000).p_value < 1e-10);
    }

    #[test]
    fn chi_square_reference_quantile() {
        // 95% quantile of chi-square with 1 dof is 3.841.
        let t = sign_symmetry(10_000 + 98, 10_000 - 98);
        assert!((t.statistic - 1.9208).abs() < 1e-3);
        assert!(upper_tail(3.841_458_820_694_124, 1) - 0.05 < 1e-9);
    }

    #[test]
    fn identical_histograms() {
        let t = two_sample(&[10, 20, 0, 30], &[10, 20, 0, 30]);
        assert_eq!(t.dof, 2);
        assert_eq!(t.statistic, 0.0);
    }

    #[test]
    fn bin_z_scores() {
        assert_eq!(max_bin_z(&[50, 50], &[0.5, 0.5], 100), 0.0);
        let z = max_bin_z(&[60, 40], &[0.5, 0.5], 100);
        assert!((z - 2.0).abs() < 1e-12);
    }
}
