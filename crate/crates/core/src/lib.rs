//! Graph layer security testbed.
//!
//! Wireless payloads are masked with physical network signals (rotor speed
//! deviations of a power grid, or a synthetic linear network) that the
//! transmitter, a chain of relays and the receiver all measure. The relays
//! are picked so that the weighted sum of their signals cancels, which lets
//! the receiver strip the mask without any shared key.
//!
//! * [`net_model`] simulates the physical dynamics.
//! * [`gft`] fits the data-driven graph Fourier surrogate of their dependency.
//! * [`secrecy`] computes secrecy rates and optimises relay weights.
//! * [`pipeline`] runs encryption, relaying, decryption and BER scoring.
//! * [`adversary`] implements passive eavesdroppers and jamming attackers.
//! * [`experiments`] orchestrates sweeps and persists result tables.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod error;
pub mod experiments;
pub mod gft;
pub mod linalg;
pub mod net_model;
pub mod pipeline;
pub mod secrecy;
pub mod seed;

pub use error::{Error, Result};

/// Float formatting used by every text export: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
