//! Preprocessing chain: re-reference, zero-phase alpha bandpass, polyphase
//! resampling, per-trial z-scoring. Order is fixed by [`preprocess`].

mod filter;
mod normalize;
mod reference;
mod resample;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use filter::{bandpass, butterworth_bandpass, filtfilt, Sos};
pub use normalize::normalize_trial;
pub use reference::rereference;
pub use resample::{resample, resample_series, Resampler};

use crate::data::RawRecording;
use crate::{Error, Result};

/// Frequency band in Hz, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub const ALPHA: Band = Band {
        low: 8.0,
        high: 13.0,
    };

    pub fn new(low: f64, high: f64) -> Self {
        Band { low, high }
    }

    /// Checks `0 < low < high < nyquist`.
    pub fn check(&self, sample_rate: f64) -> Result<()> {
        if !(self.low > 0.0 && self.low < self.high && self.high < sample_rate / 2.0) {
            return Err(Error::BandOutOfRange(format!(
                "need 0 < {} < {} < {} Hz",
                self.low,
                self.high,
                sample_rate / 2.0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocConfig {
    /// Channels averaged into the reference; required, there is no default set.
    pub reference_channels: Vec<String>,
    pub band: Band,
    pub target_rate: f64,
    /// Total Butterworth order of the bandpass (even).
    pub filter_order: usize,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        PreprocConfig {
            reference_channels: Vec::new(),
            band: Band::ALPHA,
            target_rate: 70.0,
            filter_order: 4,
        }
    }
}

impl PreprocConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reference_channels.is_empty() {
            return Err(Error::InvalidConfig(
                "reference_channels must not be empty".into(),
            ));
        }
        if self.filter_order < 2 || !self.filter_order.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "filter_order must be even and >= 2, got {}",
                self.filter_order
            )));
        }
        self.band.check(self.target_rate)
    }
}

/// Re-reference → bandpass → resample → normalize.
pub fn preprocess(rec: &RawRecording, cfg: &PreprocConfig) -> Result<RawRecording> {
    cfg.validate()?;
    let refs: Vec<&str> = cfg.reference_channels.iter().map(String::as_str).collect();
    let r = rereference(rec, &refs)?;
    let r = bandpass(&r, cfg.band, cfg.filter_order)?;
    let r = resample(&r, cfg.target_rate, Some(cfg.band))?;
    normalize_trial(&r)
}
