//! Siren identification from adaptive-notch frequency tracking.
//!
//! A scalar Kalman filter adapts the single coefficient of a biquad notch so
//! that it follows the strongest sinusoid in the signal. The tracked frequency
//! and the share of power removed by the notch form a compact two-channel
//! feature, classified by a small 1D CNN.

pub mod anf;
pub mod audio;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod features;
pub mod metrics;
pub mod nn;

pub use error::{Error, Result};
