//! Finite-budget ranking and selection.
//!
//! Given k stochastic alternatives, a fixed simulation budget T, and the goal
//! of identifying the alternative with the largest mean, this crate provides:
//!
//! - [`alt_models`]: sampling-distribution models (Gaussian, Exponential)
//!   with their cumulant generating functions, rate functions, tilting
//!   points, and pairwise decay rates;
//! - [`expansion`]: budget-aware series approximations of the probability of
//!   incorrect selection, the score functions they induce, and post-hoc PCS
//!   estimators;
//! - [`low_confidence`]: critical points and the refined approximation that
//!   accounts for simultaneous pairwise mistakes, plus the trigger used by
//!   the low-confidence policy;
//! - [`allocation_solver`]: static solvers for the budget-aware optimal
//!   allocation and its budget-free (rate-optimal) limit;
//! - [`policies`]: sequential one-sample-per-step policies (EA, OCBA, ROA,
//!   FCBA(ℓ), LC-FCBA(0)) over streaming running statistics;
//! - [`harness`]: instance generators, a seed-deterministic macro-replication
//!   engine (parallel via rayon, bit-identical sequential fallback), and
//!   exact / brute-force probability oracles;
//! - [`report`]: CSV emission with round-trip numeric formatting.

pub mod alt_models;
pub mod allocation_solver;
pub mod error;
pub mod expansion;
pub mod harness;
pub mod low_confidence;
pub mod parallel;
pub mod policies;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
