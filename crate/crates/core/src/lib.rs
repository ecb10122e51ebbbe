//! Spectro-temporal modulation features for spoofed-speech detection.
//!
//! The crate covers the whole countermeasure pipeline: WAV decoding and the
//! fixed analysis window, log-Mel / MFCC / global 2-D DCT modulation
//! features, SpecAugment-style masking, a small MLP classifier, two-system
//! score fusion, and ASVspoof-style metrics (EER and normalized min t-DCF).

pub mod audio;
pub mod augment;
pub mod classifier;
mod codec;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod feature_file;
pub mod matrix;
pub mod pipeline;
pub mod protocol;
pub mod scores;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{FeatureKind, FeatureMatrix};
