//! Event-driven spiking neural network engine with per-neuron adaptive
//! firing thresholds.
//!
//! The crate covers the full pipeline: DVS event decoding and synthetic
//! stream generation ([`event`]), LIF/SRM membrane dynamics ([`neuron`]),
//! adaptive threshold policies ([`threshold`]), a spiking MLP with
//! surrogate-gradient training ([`network`]), and firing-rate/energy
//! reporting ([`metrics`]).

pub mod error;
pub mod event;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod threshold;

pub use error::{Error, Result};
