//! Inference-oriented transceiver design for integrated sensing and
//! communication.
//!
//! A sensing device extracts a feature vector from a noisy radar observation
//! and forwards it, one feature per subcarrier, over a fading channel to an
//! edge receiver that classifies it. This crate provides:
//!
//! - [`model`]: the Gaussian-mixture feature model, sensing-noise inflation and
//!   the default synthetic model recipe.
//! - [`transceiver`]: MSE-optimal and discriminant-gain-optimal precoder and
//!   receive-scaling designs, including the water-level solve.
//! - [`analysis`]: Q-function, exponential integral, discriminant gain and the
//!   error-probability expressions.
//! - [`sim`]: the Monte Carlo engine (channel sampling, transmission, ML
//!   classification, power and split-ratio sweeps).
//!
//! # Signal convention
//!
//! Features and noise are circularly-symmetric complex Gaussians with real
//! class means. Transmit precoders are phase matched to the channel, so every
//! channel enters only through its magnitude `|h_n|` and precoders, scalings
//! and gains are stored as real numbers.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod model;
pub mod sim;
pub mod transceiver;

pub use error::{Error, Result};
pub use model::{FeatureModel, GapMode, PowerBudget, SensingConfig, SynthesisParams};
pub use transceiver::{ChannelRealization, Criterion, DesignStatus, TransceiverDesign};
