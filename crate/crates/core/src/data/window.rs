use alloc::string::String;
use alloc::vec::Vec;

use super::{AttentionLabel, RawRecording};
use crate::math::round_to_usize;
use crate::{Error, Result};

/// Where a window came from: trial index and absolute start sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowOrigin {
    pub trial: usize,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionWindow {
    pub subject_id: String,
    pub sample_rate: f64,
    /// `[n_channels][W]`
    pub samples: Vec<Vec<f64>>,
    pub label: AttentionLabel,
    pub origin: WindowOrigin,
}

impl DecisionWindow {
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end(&self) -> usize {
        self.origin.start + self.len()
    }
}

// Guards floor() against representation error in k * hop.
const HOP_EPS: f64 = 1e-9;

/// Number of windows of `w` samples at (possibly fractional) hop `hop` in `len` samples.
pub fn window_count(len: usize, w: usize, hop: f64) -> usize {
    if w == 0 || len < w {
        return 0;
    }
    libm::floor((len - w) as f64 / hop + HOP_EPS) as usize + 1
}

/// Window start offsets `floor(k * hop)` for `k < window_count`.
pub fn window_starts(len: usize, w: usize, hop: f64) -> impl Iterator<Item = usize> {
    (0..window_count(len, w, hop)).map(move |k| libm::floor(k as f64 * hop + HOP_EPS) as usize)
}

/// Cuts every trial into decision windows of `window_s` seconds.
///
/// The hop is `W * (1 - overlap_fraction)` samples and may be fractional; starts
/// are floored to whole samples. Windows never cross trial boundaries.
pub fn segment_windows(
    rec: &RawRecording,
    window_s: f64,
    overlap_fraction: f64,
) -> Result<Vec<DecisionWindow>> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidConfig(alloc::format!(
            "overlap fraction must be in [0, 1), got {overlap_fraction}"
        )));
    }
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "window length must be positive, got {window_s}"
        )));
    }
    let w = round_to_usize(window_s * rec.sample_rate);
    if w < 2 {
        return Err(Error::InvalidConfig(alloc::format!(
            "window of {window_s} s is {w} sample(s) at {} Hz; need at least 2",
            rec.sample_rate
        )));
    }
    let hop = w as f64 * (1.0 - overlap_fraction);
    // Sub-sample hops would emit the same window more than once.
    if hop < 1.0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "overlap {overlap_fraction} leaves a hop of {hop} samples for {w}-sample windows; need at least 1"
        )));
    }
    let mut out = Vec::new();
    for (ti, trial) in rec.trials.iter().enumerate() {
        for offset in window_starts(trial.len(), w, hop) {
            let start = trial.start + offset;
            out.push(DecisionWindow {
                subject_id: rec.subject_id.clone(),
                sample_rate: rec.sample_rate,
                samples: rec
                    .data
                    .iter()
                    .map(|row| row[start..start + w].to_vec())
                    .collect(),
                label: trial.label,
                origin: WindowOrigin { trial: ti, start },
            });
        }
    }
    if out.is_empty() {
        return Err(Error::WindowTooLong {
            window: w,
            longest_trial: rec.trials.iter().map(|t| t.len()).max().unwrap_or(0),
        });
    }
    Ok(out)
}
