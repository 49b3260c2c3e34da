//! Small statistics helpers for Monte Carlo summaries.

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// A proportion estimate with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProportionEstimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Wilson score interval at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> ProportionEstimate {
    if trials == 0 {
        return ProportionEstimate {
            successes,
            trials,
            estimate: f64::NAN,
            ci_lo: 0.0,
            ci_hi: 1.0,
        };
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    ProportionEstimate {
        successes,
        trials,
        estimate: phat,
        ci_lo: if successes == 0 { 0.0 } else { (center - half).max(0.0) },
        ci_hi: if successes == trials { 1.0 } else { (center + half).min(1.0) },
    }
}

pub fn wilson_95(successes: u64, trials: u64) -> ProportionEstimate {
    wilson_interval(successes, trials, Z_95)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_value() {
        // 81 successes of 263 at 95%: (0.2553, 0.3662) in the usual tables.
        let e = wilson_95(81, 263);
        assert!((e.ci_lo - 0.2553).abs() < 5e-4);
        assert!((e.ci_hi - 0.3662).abs() < 5e-4);
    }

    #[test]
    fn wilson_handles_extremes() {
        let zero = wilson_95(0, 100);
        assert_eq!(zero.estimate, 0.0);
        assert_eq!(zero.ci_lo, 0.0);
        assert!(zero.ci_hi > 0.0 && zero.ci_hi < 0.05);
        let all = wilson_95(100, 100);
        assert_eq!(all.ci_hi, 1.0);
        assert!(all.ci_lo > 0.95);
    }

    #[test]
    fn estimate_inside_interval() {
        for s in 0..=50 {
            let e = wilson_95(s, 50);
            assert!(e.ci_lo <= e.estimate && e.estimate <= e.ci_hi);
        }
    }
}
