//! Self-organizing interval type-2 fuzzy neural network for multi-step
//! time-series forecasting.
//!
//! The crate covers the full pipeline: membership math ([`fuzzy`]), the
//! nine-layer forward pass ([`network`]), analytic backpropagation and SGD
//! ([`gradients`]), fuzzy c-means and rule initialization ([`clustering`]),
//! the grow/remove structure learner ([`structure`]), series generation and
//! windowing ([`data`]), model persistence ([`model_io`]) and experiment
//! orchestration ([`experiment`]).

pub mod clustering;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fuzzy;
pub mod gradients;
pub mod model_io;
pub mod network;
pub mod structure;

pub use error::{Error, Result};
pub use model_io::Model;
pub use network::{Ablation, NetworkParams};
