//! Fairness-aware training via Bayesian-network-informed meta reweighting.
//!
//! A small feed-forward classifier is trained with per-sample weights that
//! are adjusted each batch by differentiating a group-fairness loss through
//! a one-step lookahead update. A discrete Bayesian network over the
//! protected attributes, refreshed online from the model's own predictions,
//! calibrates the fairness loss. Auditing utilities (true-positive-rate
//! disparity, disparate-impact gap, phi-coefficient analysis) and a
//! synthetic data generator round out the library.

pub mod bayesnet;
pub mod cli;
pub mod data;
pub mod diffcore;
pub mod error;
pub mod fairmetrics;
pub mod trainer;

pub use error::{Error, Result};
