//! Spectro-spatial EEG features and a compact CNN for left/right auditory
//! spatial attention detection.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical stage of
//! the pipeline:
//!
//! ```text
//! RawRecording
//!   ├─ signal::rereference      subtract mean of reference channels, drop them
//!   ├─ signal::bandpass         zero-phase Butterworth, per trial segment
//!   ├─ signal::resample         Kaiser-windowed sinc polyphase
//!   ├─ signal::normalize_trial  z-score per (channel, trial)
//!   ├─ data::segment_windows    decision windows with fractional hop
//!   ├─ data::stratified_split   block-wise 80/10/10 per (subject, label)
//!   ├─ features::extract_ssf    alpha power → projected scalp → 32×32 maps
//!   └─ cnn::train / evaluate    conv → BN → ReLU → pool → FC(512) → FC(32) → softmax
//! ```
//!
//! The stimulus-reconstruction decoder used as the linear reference lives in
//! [`baseline`]. File formats, statistics and the command line live in the
//! companion `ssf` crate.
#![no_std]

extern crate alloc;

pub mod baseline;
pub mod cnn;
pub mod data;
mod error;
pub mod features;
pub(crate) mod math;
pub mod signal;

pub use error::{Error, Result};
