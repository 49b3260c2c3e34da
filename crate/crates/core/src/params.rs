use core::fmt;

use crate::error::{Error, Result};

/// Vertex color. Red is the color of the initial majority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    Red,
    Blue,
}

impl Color {
    pub fn is_red(self) -> bool {
        self == Color::Red
    }

    pub fn flipped(self) -> Color {
        match self {
            Color::Red => Color::Blue,
            Color::Blue => Color::Red,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub(crate) fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive"));
    }
    if k.is_multiple_of(2) {
        return Err(Error::InvalidParameter("k must be odd"));
    }
    Ok(())
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::InvalidParameter("p must lie in [0, 1/2]"));
    }
    Ok(())
}

pub(crate) fn check_unit(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter("argument must lie in [0, 1]"));
    }
    Ok(())
}

/// The vote rule shared by every new vertex: `k` noisy observations, each
/// flipped independently with probability `p`, then a majority vote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyMajority {
    k: u32,
    p: f64,
}

impl NoisyMajority {
    pub fn new(k: u32, p: f64) -> Result<Self> {
        check_k(k)?;
        check_p(p)?;
        Ok(Self { k, p })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Parameters of the growth process: the vote rule plus the number `ell`
/// of red vertices among the `k` roots. Red is always the initial majority.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    rule: NoisyMajority,
    ell: u32,
}

impl ModelParams {
    pub fn new(k: u32, p: f64, ell: u32) -> Result<Self> {
        let rule = NoisyMajority::new(k, p)?;
        if 2 * ell <= k {
            return Err(Error::InvalidParameter("ell must exceed k/2 (red is the initial majority)"));
        }
        if ell > k {
            return Err(Error::InvalidParameter("ell must not exceed k"));
        }
        Ok(Self { rule, ell })
    }

    pub fn rule(&self) -> NoisyMajority {
        self.rule
    }

    pub fn k(&self) -> u32 {
        self.rule.k
    }

    pub fn p(&self) -> f64 {
        self.rule.p
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    /// Red proportion among the roots.
    pub fn initial_red_fraction(&self) -> f64 {
        self.ell as f64 / self.rule.k as f64
    }
}
