use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Speech envelope sampled at the EEG rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub speaker_id: String,
    pub sample_rate: f64,
    pub samples: Vec<f64>,
}

impl Envelope {
    pub fn new(speaker_id: impl Into<String>, sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        let e = Envelope {
            speaker_id: speaker_id.into(),
            sample_rate,
            samples,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "envelope sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if let Some(i) = self
            .samples
            .iter()
            .position(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::InvalidConfig(format!(
                "envelope `{}` sample {i} is {} (must be finite and non-negative)",
                self.speaker_id, self.samples[i]
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
