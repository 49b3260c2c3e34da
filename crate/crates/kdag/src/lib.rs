//! Experiments, file formats and the command-line front end for
//! broadcasting on uniform random recursive k-DAGs.
//!
//! The numerical work lives in [`kdag_core`]; this crate adds parallel
//! Monte Carlo sweeps, CSV/JSON/DOT output, flat config files and the
//! `kdag` binary.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod export;
pub mod formats;
pub mod manifest;
pub mod stats;

pub use kdag_core;
