//! Directed polymers in random environment in dimension 1 + 1 and 1 + 2.
//!
//! The crate computes quenched partition functions exactly by transfer
//! matrices, estimates free energies by Monte Carlo with reproducible
//! counter-based streams, and turns the fractional-moment, change-of-measure
//! and percolation arguments for very strong disorder into numerical
//! certificates and audits.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod disorder;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod oracle;
pub mod renewal;
pub mod rng;
pub mod stats;
pub mod transfer;

pub use disorder::{DisorderSpec, EnvironmentField, Window};
pub use error::{Error, Result};
pub use geometry::{CoarsePlan, Dim, Pos};
