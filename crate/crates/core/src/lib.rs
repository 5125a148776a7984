//! Sample-specific root causal analysis under linear non-Gaussian acyclic
//! models with latent confounders.
//!
//! The pipeline has three stages:
//!
//! 1. [`extraction`] recovers *inducing terms*: each observed variable with as
//!    many of its ancestral error terms partialed out as the data allow. The
//!    `eel` routine also returns an undirected dependence graph over the
//!    recovered terms.
//! 2. [`shapley`] fits a logistic model of the diagnosis on the inducing terms
//!    and attributes each sample's log-odds to them, averaging only over the
//!    dependence-graph neighborhood of each term.
//! 3. [`eval`] scores estimated attributions against ground truth computed
//!    from a known [`sem::SemModel`], which [`synth`] generates.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the benchmark
//! runner and the command-line interface live in the `rootcause` crate.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod extraction;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod sem;
pub mod shapley;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use linalg::Matrix;
