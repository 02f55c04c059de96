//! From-scratch dense neural-network training built around an adaptive
//! activation family that augments the RELU argument with a trainable
//! cubic-order term, plus the experiment harness that measures the resulting
//! accuracy/convergence tradeoff on MNIST over many seeded realizations.
//!
//! Modules:
//! - [`tensor`]: row-major `f64` matrices with deterministic reductions
//! - [`activations`]: RELU, swish, and the adaptive NEAF family with exact
//!   analytic gradients
//! - [`network`]: dense/activation layer stacks, softmax cross-entropy,
//!   manual backpropagation
//! - [`optim`]: pinned Nadam recurrence
//! - [`data`]: IDX parsing, MNIST fetch/load, deterministic batching,
//!   synthetic blobs
//! - [`experiment`]: seeded realizations, the epoch-15 gate, sweeps,
//!   histograms, CSV output
//! - [`gradcheck`]: finite-difference verification of every activation kind

pub mod activations;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod network;
pub mod optim;
pub mod tensor;

pub use activations::{ActivationKind, AdaptiveParams, NonlinearBasis};
pub use error::{Error, Result};
pub use network::{Network, NetworkSpec};
pub use tensor::{Axis, Matrix};
