use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Montage;
use crate::{Error, Result};

/// Binary attention direction. `Left` is class 0, `Right` is class 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttentionLabel {
    Left,
    Right,
}

impl AttentionLabel {
    pub fn class_index(self) -> usize {
        match self {
            AttentionLabel::Left => 0,
            AttentionLabel::Right => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Self {
        if i == 0 {
            AttentionLabel::Left
        } else {
            AttentionLabel::Right
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            AttentionLabel::Left => AttentionLabel::Right,
            AttentionLabel::Right => AttentionLabel::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttentionLabel::Left => "Left",
            AttentionLabel::Right => "Right",
        }
    }
}

impl fmt::Display for AttentionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttentionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Left" => Ok(AttentionLabel::Left),
            "Right" => Ok(AttentionLabel::Right),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// Sample range `[start, end)` with one attention label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub start: usize,
    pub end: usize,
    pub label: AttentionLabel,
}

impl Trial {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Multi-channel EEG, channel-major, in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub subject_id: String,
    pub sample_rate: f64,
    pub channels: Vec<String>,
    pub data: Vec<Vec<f64>>,
    pub trials: Vec<Trial>,
}

impl RawRecording {
    /// Builds a recording and checks every invariant.
    pub fn new(
        subject_id: impl Into<String>,
        sample_rate: f64,
        channels: Vec<String>,
        data: Vec<Vec<f64>>,
        trials: Vec<Trial>,
    ) -> Result<Self> {
        let rec = RawRecording {
            subject_id: subject_id.into(),
            sample_rate,
            channels,
            data,
            trials,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if self.data.len() != self.channels.len() {
            return Err(Error::ShapeMismatch {
                what: "data rows vs channel names".into(),
                expected: self.channels.len(),
                found: self.data.len(),
            });
        }
        let n = self.n_samples();
        for row in &self.data {
            if row.len() != n {
                return Err(Error::ShapeMismatch {
                    what: "samples per channel".into(),
                    expected: n,
                    found: row.len(),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for c in &self.channels {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateChannel(c.clone()));
            }
        }
        validate_trials(&self.trials, n)
    }
}

pub(crate) fn validate_trials(trials: &[Trial], n_samples: usize) -> Result<()> {
    let mut sorted: Vec<&Trial> = trials.iter().collect();
    sorted.sort_by_key(|t| t.start);
    for t in &sorted {
        if t.start >= t.end {
            return Err(Error::InvalidTrial(format!(
                "empty range {}..{}",
                t.start, t.end
            )));
        }
        if t.end > n_samples {
            return Err(Error::InvalidTrial(format!(
                "range {}..{} exceeds {} samples",
                t.start, t.end, n_samples
            )));
        }
    }
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::InvalidTrial(format!(
                "overlapping trials {}..{} and {}..{}",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )));
        }
    }
    Ok(())
}

/// Restricts recording and montage to `keep`, in the order given by `keep`.
pub fn subset_channels(
    rec: &RawRecording,
    montage: &Montage,
    keep: &[&str],
) -> Result<(RawRecording, Montage)> {
    let mut data = Vec::with_capacity(keep.len());
    let mut entries = Vec::with_capacity(keep.len());
    for &name in keep {
        let ri = rec
            .channel_index(name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))?;
        let e = montage
            .get(name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))?;
        data.push(rec.data[ri].clone());
        entries.push(e.clone());
    }
    let sub = RawRecording::new(
        rec.subject_id.clone(),
        rec.sample_rate,
        keep.iter().map(|s| s.to_string()).collect(),
        data,
        rec.trials.clone(),
    )?;
    Ok((sub, Montage::new(entries)?))
}
