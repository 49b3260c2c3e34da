//! CSV and JSON encodings of exact distributions and trajectories.
//!
//! Floats are printed with Rust's shortest round-trip formatting. CSV
//! output uses LF line endings and no quoting (all fields are numeric).

use std::fmt::Write as _;

use kdag_core::exact_dist::{ExactDistribution, FlipTimeMass};
use serde::Serialize;

/// `r,prob` rows for every red count `r = 0..=n`.
pub fn distribution_csv(dist: &ExactDistribution) -> String {
    let mut out = String::from("r,prob\n");
    for (r, p) in dist.probs.iter().enumerate() {
        writeln!(out, "{r},{p}").unwrap();
    }
    out
}

#[derive(Debug, Serialize)]
struct DistributionJson<'a> {
    k: u32,
    p: f64,
    ell: u32,
    n: u64,
    majority_error: f64,
    mean_proportion: f64,
    probs: &'a [f64],
}

pub fn distribution_json(dist: &ExactDistribution) -> String {
    let doc = DistributionJson {
        k: dist.params.k(),
        p: dist.params.p(),
        ell: dist.params.ell(),
        n: dist.n,
        majority_error: dist.majority_error(),
        mean_proportion: dist.mean_proportion(),
        probs: &dist.probs,
    };
    serde_json::to_string_pretty(&doc).expect("distribution serializes") + "\n"
}

/// `t,prob` rows for `t = k+1..=n`; the censored mass `P{T > n}` is not a row.
pub fn flip_time_csv(mass: &FlipTimeMass) -> String {
    let mut out = String::from("t,prob\n");
    for (i, p) in mass.mass.iter().enumerate() {
        writeln!(out, "{},{p}", mass.first + i as u64).unwrap();
    }
    out
}

/// `trial,n,red` rows.
pub fn trajectories_csv<'a>(paths: impl IntoIterator<Item = (u64, &'a [(u64, u64)])>) -> String {
    let mut out = String::from("trial,n,red\n");
    for (trial, path) in paths {
        for &(n, red) in path {
            writeln!(out, "{trial},{n},{red}").unwrap();
        }
    }
    out
}
