//! Design engine, calibrator and Monte-Carlo simulator for Bayesian multi-arm
//! de-intensification (non-inferiority) trials with survival and toxicity
//! endpoints, plus the frequentist repeated-confidence-interval comparators.
//!
//! The crate is organized around the trial life cycle:
//!
//! * [`survival`] — scenario distributions, sampling, Kaplan-Meier, RMST and
//!   bootstrap variance,
//! * [`betastacy`] — the nonparametric Bayesian survival model on a time grid,
//! * [`design`] — decision boundaries, the design configuration and the
//!   per-trial state machine,
//! * [`calibration`] — Monte-Carlo calibration of boundary scales,
//! * [`comparator`] — alpha-spending RCI designs used as frequentist baselines,
//! * [`oc`] — parallel operating-characteristic simulation,
//! * [`replay`] — interim decision replay on a fixed data set.
//!
//! All randomness flows through explicit seeded streams (see [`rng`]), so every
//! result is reproducible bit-for-bit regardless of worker count.

// validation deliberately writes `!(x > 0.0)` so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod betastacy;
pub mod calibration;
pub mod comparator;
pub mod design;
pub mod error;
pub mod exec;
pub mod oc;
pub mod replay;
pub mod rng;
pub mod stats;
pub mod survival;

pub use error::Error;

/// Crate version embedded in every report for provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
