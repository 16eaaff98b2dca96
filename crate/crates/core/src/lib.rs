//! Differential-privacy mechanisms and tooling for studying the three-way
//! tradeoff between privacy, utility and group fairness.
//!
//! The crate is organised by concern:
//!
//! * [`mechanisms`]: Laplace, Gaussian, exponential, sparse-vector and
//!   sample-and-aggregate releases, each driven by an explicit random source.
//! * [`accountant`]: basic-composition budget ledger and per-group budgets.
//! * [`fairness`]: labelled two-group datasets, confusion counts, and the
//!   demographic-parity and equalized-odds gaps.
//! * [`frontier`]: closed-form utility/fairness bounds, the critical sample
//!   size, Pareto-front extraction and grid sweeps.
//! * [`attack`]: Bayesian membership inference against aggregate releases.
//! * [`casestudy`]: synthetic two-group data and (DP-)logistic regression
//!   with an optional fairness penalty.
//! * [`cli`]: the `tradeoff` command-line front end.

pub mod accountant;
pub mod attack;
pub mod casestudy;
pub mod cli;
mod error;
pub mod fairness;
pub mod frontier;
pub mod mechanisms;
pub mod rng;

pub use error::{Error, Result};
