//! Energy-efficient radio resource management for federated edge learning.
//!
//! Edge devices train a shared model locally and upload their updates to a
//! server over OFDMA within a per-round deadline. This crate implements the
//! server-side policies that minimize the devices' total uploading energy:
//!
//! - [`bandwidth`] — closed-form optimal bandwidth fractions for a fixed
//!   schedule, with the coupling multiplier found by monotone bisection
//!   ([`bandwidth::solve`]), plus the uniform-split baseline.
//! - [`scheduling`] — closed-form selection priorities trading energy
//!   against the number of participating devices ([`scheduling::schedule_all`]).
//! - [`joint`] — the alternating optimizer that iterates the two closed
//!   forms on the relaxed selection problem and rounds to a binary schedule
//!   ([`joint::solve`]).
//! - [`oracle`] — independent brute-force minimizers (simplex grid search,
//!   1-D scan, exhaustive schedule enumeration) used to validate the closed
//!   forms.
//! - [`sim`] — a seeded Monte-Carlo harness generating Rayleigh-faded device
//!   populations and sweeping the round deadline.
//!
//! All quantities are SI: seconds, hertz, watts, bits, joules.

// Validation deliberately writes `!(x > 0.0)` so that NaN fails the check
// along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod error;
pub mod joint;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod scheduling;
pub mod sim;

pub use error::{Error, Result};
pub use model::{Allocation, Device, SystemParams};
