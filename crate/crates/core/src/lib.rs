//! Core algorithms for broadcasting a bit on uniform random recursive k-DAGs.
//!
//! Each new vertex picks `k` parents uniformly at random (with replacement)
//! among the existing vertices, observes their colors through a binary
//! symmetric channel with flip probability `p`, and takes the majority vote.
//! This crate holds everything that does not need an operating system:
//!
//! - [`analytic`]: the drift function of the red proportion, the regime
//!   thresholds, its fixed points and the universal error lower bound.
//! - [`dag_sim`]: explicit growth of the labelled k-DAG.
//! - [`urn_sim`]: the equivalent urn process that only tracks the red count.
//! - [`exact_dist`]: the exact law of the red count by dynamic programming.
//! - [`tree_decomp`]: the marked recursive-tree representation for `k = 1`.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod dag_sim;
mod error;
pub mod exact_dist;
mod params;
pub mod rng;
pub mod special;
pub mod stats;
pub mod tree_decomp;
pub mod urn_sim;

pub use error::{Error, Result};
pub use params::{Color, ModelParams, NoisyMajority};
pub use rng::{RandomStream, StreamRng};
