//! flowids: a from-scratch hybrid deep-learning classifier for network-flow
//! intrusion records.
//!
//! The crate implements the full experiment pipeline in plain f64:
//!
//! - [`tensor`]: dense matrix kernel and the finite-difference gradient checker
//! - [`layers`]: dense, squeeze-excitation, token-mixing block, LSTM/BiLSTM,
//!   each with a hand-derived backward pass
//! - [`model`]: the four architecture variants, parameter registry, weights I/O
//! - [`datapipe`]: CSV ingestion, encoding, scaling, oversampling, splitting
//! - [`trainer`]: cross-entropy + Adam mini-batch training loop
//! - [`evalkit`]: confusion matrix, classification report, ROC/AUC, latency
//!
//! Every stochastic step is driven by seeded ChaCha8 streams ([`rng`]), so a
//! fixed seed reproduces results bit-for-bit.

pub mod datapipe;
pub mod error;
pub mod evalkit;
pub mod layers;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
