//! Kolmogorov-Arnold iteration for orbit equations `g . 0 = x` of scaled group
//! actions, on truncated analytic series, with every bound of the convergence
//! argument checked at runtime.
//!
//! Modules, bottom-up:
//!
//! * [`scale`]: scaled spaces as truncated Taylor/Fourier series with weighted
//!   l1 norms, series arithmetic, and measured k-bounded operator norms.
//! * [`group`]: near-identity germs under composition with the exp/log chart.
//! * [`action`]: the action interface, condition (A_c) and the iteration map.
//! * [`solver`]: schedules, the epsilon constant, the iteration and its certificates.
//! * [`instances`]: the germ action and a small-divisor right inverse.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod error;
pub mod exec;
pub mod group;
pub mod instances;
pub mod rng;
pub mod scale;
pub mod solver;

pub use error::{Error, Result};
pub use exec::Execution;
