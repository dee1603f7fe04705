//! Zero-inflated Beta regression (ZIBR) mixed models for longitudinal
//! proportion data, estimated by maximum likelihood with a stochastic
//! approximation EM (SAEM) algorithm.
//!
//! The model describes a bounded outcome `y ∈ [0, 1)` observed repeatedly on
//! each individual as a two-part mixture: a logistic regression with a random
//! intercept governs presence (`y > 0`), and, conditional on presence, a Beta
//! regression with its own random intercept governs abundance. Because the
//! marginal likelihood integrates over the random intercepts, the E-step is
//! intractable; SAEM replaces it with Metropolis–Hastings draws of the
//! intercepts and a decreasing-stepsize stochastic approximation.
//!
//! What the crate provides:
//! - [`saem::fit`]: the full estimation loop (simulation, stochastic
//!   approximation, maximization) with parameter traces and diagnostics;
//! - [`loglik::loglik_is`]: importance-sampling estimate of the observed-data
//!   log-likelihood at the fitted parameters;
//! - [`fim`]: stochastic approximation of the observed Fisher information and
//!   standard errors via Louis's missing-information identity;
//! - [`inference`]: likelihood-ratio and Wald tests plus Benjamini–Hochberg
//!   adjustment;
//! - [`simulate`] and [`study`]: synthetic-data generation (including MCAR
//!   dropout and interpolation) and a Monte Carlo study harness;
//! - [`cli`]: long-format CSV ingestion and the subcommand entry points used
//!   by the `zibr` binary.
//!
//! Everything is deterministic given a seed: random-number streams are derived
//! per (chain, individual, iteration) with a counter-based split, so results
//! are bit-identical regardless of thread scheduling and of whether the
//! `parallel` feature (rayon) is enabled.

// Numeric-kernel style: indexed loops over several parallel arrays, and
// negated partial-order comparisons that deliberately treat NaN as
// out-of-domain.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)] // frozen high-precision reference constants

pub mod cli;
pub mod error;
pub mod exec;
pub mod fim;
pub mod inference;
pub mod loglik;
pub mod model;
pub mod optimizer;
pub mod sampler;
pub mod saem;
pub mod simulate;
pub mod special;
pub mod study;

mod linalg;
mod prepared;

pub use error::{Error, Result};
pub use model::{Dataset, Individual, Observation, RandomEffects, ZibrParams};
pub use saem::{FitResult, StepSchedule};

/// Crate version string embedded in run manifests and study reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
