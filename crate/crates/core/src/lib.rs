//! Eye detection with classical image processing and a small neural network.
//!
//! The pipeline segments skin in HSV, takes the largest skin region as the
//! face, extracts dark non-skin holes in its upper part as eye candidates,
//! and scores each candidate with a two-layer log-sigmoid network over
//! Gabor-filtered, canonically aligned windows. Training data comes from
//! aligned and augmented eye crops plus negatives mined from eye-free
//! scenery.

pub mod classifier;
pub mod config;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod gabor;
pub mod imaging;
pub mod metrics;
pub mod morphology;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
