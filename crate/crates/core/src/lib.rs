//! Sequence models that decide per series how far ahead to keep
//! predicting, trained with a confidence-masked loss.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: a small eager reverse-mode differentiation tape
//! - [`optim`], [`gradcheck`], [`checkpoint`]: training plumbing
//! - [`model`]: feed-forward and LSTM baselines plus the
//!   encoder/decoder network with per-series softmax heads
//! - [`loss`]: confidence functions, masked loss, penalty, rollout
//! - [`data`]: synthetic multi-series prices, labeling, windows
//! - [`harness`]: walk-forward training, F1 scoring, sweeps, reports

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod gradsuite;
pub mod graph;
pub mod harness;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;
pub mod tensor;

pub use error::{CoreError, Result};
pub use graph::{Graph, NodeId};
pub use params::ParameterSet;
pub use tensor::Tensor;
