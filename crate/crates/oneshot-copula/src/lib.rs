//! Dependence estimation between the two failure modes of one-shot
//! devices under constant-stress accelerated life testing.
//!
//! A one-shot device is destroyed by its own test, so each unit
//! contributes only the category it lands in at its inspection time:
//! no failure, mode 1 only, mode 2 only, or both. This crate models the
//! joint failure behavior with a Gumbel-Hougaard or Frank copula whose
//! parameter depends log-linearly (or linearly) on the stress level, and
//! estimates the dependence by minimizing a density-power divergence
//! between empirical and model category probabilities. The tuning
//! parameter beta trades efficiency (beta = 0, the quasi maximum
//! likelihood estimate) against robustness to contaminated test
//! conditions (beta > 0).
//!
//! Modules:
//! - [`copulas`]: the two families, their densities, Kendall-tau maps,
//!   and the stress link.
//! - [`data_model`]: test conditions, category counts, empirical margins.
//! - [`inference`]: divergence objectives, initialization, fitting.
//! - [`simulation`]: synthetic data generation, contamination, and the
//!   Monte Carlo study.
//! - [`datasets`]: the embedded serial sacrifice data and CSV files.
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod copulas;
pub mod data_model;
pub mod datasets;
pub mod error;
pub mod inference;
pub(crate) mod optim;
pub mod simulation;

pub use error::{Error, Result};
