//! Aggregation of pixel-wise segmentation uncertainty maps into image-level
//! scores, and evaluation of those scores for out-of-distribution and
//! failure detection.

pub mod cli;
pub mod error;
pub mod eval;
pub mod intensity;
pub mod io;
pub mod map;
pub mod meta_gmm;
pub mod rng;
pub mod spatial;
pub mod strategy;
pub mod synth;

pub use error::{Error, Result};
pub use map::{entropy_uncertainty, FeatureVector, ProbabilityStack, SegmentationMask, UncertaintyMap};
pub use strategy::Strategy;
