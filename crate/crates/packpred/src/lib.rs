//! Online primal-dual algorithms for fractional packing with prediction
//! confidence, plus the discrete ad-auction allocation variant.
//!
//! The crate is organised around the lifecycle of an experiment:
//!
//! - [`objective`] — set-function oracles and their multilinear extensions,
//!   with exact and Monte-Carlo evaluation and a local-smoothness checker.
//! - [`engine`] — the continuous online primal-dual growth process for
//!   general packing instances, together with runtime verifiers for primal
//!   and dual feasibility.
//! - [`adauction`] — the discrete allocation algorithm for budgeted
//!   ad-auction revenue maximization.
//! - [`offline`] — a dense simplex solver for fractional optima, a small
//!   branch-and-bound for integral optima, and the perturbed prediction
//!   generator.
//! - [`bench`] — seeded instance generation, (eta, epsilon) sweeps and
//!   plot-ready data file emission.

pub mod adauction;
pub mod bench;
pub mod engine;
pub mod objective;
pub mod offline;
