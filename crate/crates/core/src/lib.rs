//! Weighted-sum fusion of machine-translation metric scores.
//!
//! Base metric scores are clipped, normalized to `[0, 1]` (inverted where
//! higher raw values are worse) and combined as `Σ αᵢ·ỹᵢ`. The weights
//! `αᵢ ∈ [0, 1]` are chosen by Gaussian-process Bayesian optimization to
//! maximize segment-level Kendall τ-b against human judgments.

pub mod bayes_opt;
pub mod calibration;
pub mod cli;
pub mod config;
pub mod correlation;
pub mod error;
pub mod gp;
pub mod io;
pub mod model;
pub mod preprocess;
pub mod scoring;

pub use error::{Error, Result};
pub use gp::GpState;
pub use model::{CompositeConfig, MetricSpec, ScoreMatrix, SegmentKey, SegmentRecord};
