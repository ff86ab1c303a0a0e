//! Numerical laboratory for Gaussian integrators.
//!
//! A Gaussian integrator is a centered Gaussian process of the form
//! `x(t) = (A 1_[0,t], xi)`, where `A` is a bounded linear operator on
//! L2([0,1]) and `xi` is white noise. This crate models L2([0,1]) by step
//! functions on a uniform grid and provides, on top of that model:
//!
//! * operator algebra with cached singular-value extremes ([`operator`]),
//! * Gram determinants, projections, and local-nondeterminism ratios
//!   ([`gram`]),
//! * executable inequality and identity checks with randomized suites
//!   ([`checks`], [`suites`]),
//! * seeded white-noise sampling, integrator paths, and pinned bridge paths
//!   ([`noise`], [`path`]),
//! * local-time estimators and exact moment quadratures ([`local_time`],
//!   [`moments`]),
//! * conditional self-intersection functionals in dimensions 1 and 2
//!   ([`selfx`]).
//!
//! Everything stochastic is reproducible: replicate `r` of an experiment
//! derives its own ChaCha8 stream from `(master seed, label, r)`, and all
//! reductions are fixed-order pairwise sums, so results are byte-identical
//! across thread counts.

pub mod checks;
pub mod error;
pub mod gram;
pub mod grid;
pub mod local_time;
mod mat;
pub mod moments;
pub mod noise;
pub mod operator;
pub mod path;
pub mod report;
pub mod selfx;
pub mod suites;
pub mod util;

pub use error::{Error, Result};
pub use grid::{GridSpec, GridSubset, L2Vec};
pub use operator::{KernelTable, L2Operator};
pub use report::{SuiteResult, VerifyReport};
