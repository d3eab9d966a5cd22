//! Numerical toolkit for the multi-antenna multi-user downlink.
//!
//! The crate answers one question from several directions: how much extra
//! transmit power is needed to keep the sum-rate constant when fewer users
//! are served with the same antenna array.
//!
//! - [`closed_form`] evaluates the large-system Marchenko–Pastur rate and
//!   the resulting sensitivity, plus asymptotes and an operating-point solver.
//! - [`mc`] estimates the equal-power and power-optimized sum-rates by Monte Carlo.
//! - [`maxchi`] holds the extreme-value machinery for the maximum of i.i.d.
//!   gamma variates that governs the low-SNR behaviour of the optimized rate.
//! - [`precoder`] is an uncoded vector-perturbation transmitter/receiver with a
//!   bit-error-rate harness.
//! - [`matgen`] is the complex linear algebra and seeded channel generator
//!   underneath all of the above.

pub mod closed_form;
pub mod error;
pub mod lattice;
pub mod matgen;
pub mod maxchi;
pub mod mc;
pub mod precoder;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use matgen::{ChannelEnsemble, ComplexMatrix};
pub use stats::Estimate;

pub use num_complex::Complex64;

/// log₂(e), the conversion factor from nats to bits.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
