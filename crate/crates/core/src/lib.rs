//! Aspect-aware LSTM for aspect-level sentiment classification.
//!
//! The aspect vector enters the input, forget and output gates of every
//! recurrent step through dedicated aspect gates, so the hidden states are
//! already conditioned on the aspect before any attention is applied.

pub mod cell;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod head;
pub mod metrics;
pub mod model;
pub mod params;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
