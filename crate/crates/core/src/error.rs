use thiserror::Error;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("invalid horizon: n = {n} is smaller than k = {k}")]
    InvalidHorizon { n: u64, k: u32 },

    #[error("fixed points exist only in the low-mutation regime (p = {p} >= {p_low})")]
    NotLowRegime { p: f64, p_low: f64 },

    #[error("degenerate parameters: {0}")]
    Degenerate(&'static str),

    #[error("not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("horizon n = {n} exceeds the exact-computation limit of {limit}")]
    ResourceLimit { n: u64, limit: u64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: u32 },

    #[error("probability mass drifted to {total} (tolerance 1e-9)")]
    MassNotConserved { total: f64 },

    #[error("internal consistency check failed: {0}")]
    Internal(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
