//! Earth Mover's Distance between absolutely continuous measures on road
//! networks.
//!
//! The exact value comes from a finite convex-cost network flow problem
//! ([`emd_exact`]); two tessellation-based schemes ([`emd_approx`]) bracket
//! and approximate it; [`dpdp`] simulates a pickup-and-delivery fleet whose
//! capacity the distance predicts.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dpdp;
pub mod emd_approx;
pub mod emd_exact;
pub mod error;
pub mod flow;
pub mod instance;
pub mod measures;
pub mod num;
pub mod roadmap;

pub use error::{Error, Result};
