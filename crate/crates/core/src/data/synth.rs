use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AttentionLabel, Hemisphere, Montage, RawRecording, Trial};
use crate::baseline::Envelope;
use crate::{Error, Result};

/// Speech-envelope component mixed into the synthetic EEG through a known
/// lagged forward model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelopeSynth {
    /// Scale of the envelope response in each channel.
    pub gain: f64,
    /// Corner of the two-pass one-pole smoother applied to white noise.
    pub cutoff_hz: f64,
    /// Length of the positive response kernel.
    pub response_s: f64,
}

impl Default for EnvelopeSynth {
    fn default() -> Self {
        EnvelopeSynth {
            gain: 1.0,
            cutoff_hz: 4.0,
            response_s: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub subject_id: String,
    pub n_channels: usize,
    pub duration_s: f64,
    pub sample_rate: f64,
    pub alpha_center: f64,
    pub alpha_amplitude: f64,
    /// Attended-side hemisphere carries `1 + gain` times the alpha amplitude.
    pub lateralization_gain: f64,
    pub noise_sigma: f64,
    /// Shared noise added to every channel and carried alone by the references.
    pub common_mode_sigma: f64,
    pub reference_channels: Vec<String>,
    pub n_trials: usize,
    pub seed: u64,
    pub envelope: Option<EnvelopeSynth>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            subject_id: "S01".into(),
            n_channels: 64,
            duration_s: 480.0,
            sample_rate: 128.0,
            alpha_center: 10.0,
            alpha_amplitude: 1.0,
            lateralization_gain: 2.0,
            noise_sigma: 1.0,
            common_mode_sigma: 1.0,
            reference_channels: vec!["M1".into(), "M2".into()],
            n_trials: 8,
            seed: 0,
            envelope: None,
        }
    }
}

impl SynthConfig {
    pub fn total_samples(&self) -> usize {
        libm::round(self.duration_s * self.sample_rate) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            ));
        }
        if !(self.alpha_center > 0.0 && self.alpha_center < self.sample_rate / 2.0) {
            return bad(format!(
                "alpha_center {} Hz must lie in (0, {}) Hz",
                self.alpha_center,
                self.sample_rate / 2.0
            ));
        }
        if !(self.lateralization_gain >= 0.0) {
            return bad(format!(
                "lateralization_gain must be >= 0, got {}",
                self.lateralization_gain
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.common_mode_sigma >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        let total = self.duration_s * self.sample_rate;
        let n = libm::round(total);
        if (total - n).abs() > 1e-6 || !(n as usize).is_multiple_of(self.n_trials) || n < 1.0 {
            return bad(format!(
                "duration {} s at {} Hz does not divide into {} equal trials",
                self.duration_s, self.sample_rate, self.n_trials
            ));
        }
        if let Some(e) = &self.envelope {
            if !(e.cutoff_hz > 0.0 && e.response_s > 0.0 && e.gain >= 0.0) {
                return bad("envelope cutoff, response and gain must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub recording: RawRecording,
    /// `[left speaker, right speaker]` when envelope synthesis is enabled.
    pub envelopes: Option<[Envelope; 2]>,
}

/// Generates a cocktail-party recording whose alpha amplitude is lateralized
/// toward the attended side.
///
/// Per trial, one alpha sinusoid with a random phase is shared by all scalp
/// channels; channels on the attended hemisphere carry `(1 + gain)` times the
/// amplitude of the other hemisphere, midline channels the mean of both.
/// Independent Gaussian noise is added per channel, and a common-mode signal
/// is added everywhere including the reference channels.
pub fn synth_recording(cfg: &SynthConfig, montage: &Montage) -> Result<SyntheticSubject> {
    cfg.validate()?;
    if montage.len() != cfg.n_channels {
        return Err(Error::ShapeMismatch {
            what: "synthetic channel count vs montage".into(),
            expected: cfg.n_channels,
            found: montage.len(),
        });
    }
    let n = cfg.total_samples();
    let trial_len = n / cfg.n_trials;
    let fs = cfg.sample_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut labels: Vec<AttentionLabel> = (0..cfg.n_trials)
        .map(|k| {
            if k % 2 == 0 {
                AttentionLabel::Left
            } else {
                AttentionLabel::Right
            }
        })
        .collect();
    labels.shuffle(&mut rng);
    let trials: Vec<Trial> = labels
        .iter()
        .enumerate()
        .map(|(k, &label)| Trial {
            start: k * trial_len,
            end: (k + 1) * trial_len,
            label,
        })
        .collect();
    let phases: Vec<f64> = (0..cfg.n_trials)
        .map(|_| rng.random::<f64>() * 2.0 * PI)
        .collect();

    let common: Vec<f64> = (0..n)
        .map(|_| cfg.common_mode_sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let strong = cfg.alpha_amplitude * (1.0 + cfg.lateralization_gain);
    let weak = cfg.alpha_amplitude;
    let w = 2.0 * PI * cfg.alpha_center / fs;

    let mut data = Vec::with_capacity(cfg.n_channels + cfg.reference_channels.len());
    for e in montage.entries() {
        let hemi = Montage::hemisphere(e);
        let mut row = Vec::with_capacity(n);
        for (k, trial) in trials.iter().enumerate() {
            let amp = match (hemi, trial.label) {
                (Hemisphere::Midline, _) => 0.5 * (strong + weak),
                (Hemisphere::Left, AttentionLabel::Left)
                | (Hemisphere::Right, AttentionLabel::Right) => strong,
                _ => weak,
            };
            for t in trial.start..trial.end {
                let noise = cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                row.push(amp * libm::sin(w * t as f64 + phases[k]) + noise + common[t]);
            }
        }
        data.push(row);
    }
    for _ in &cfg.reference_channels {
        data.push(common.clone());
    }

    let envelopes = match &cfg.envelope {
        None => None,
        Some(es) => {
            let left = smooth_envelope(&mut rng, n, fs, es.cutoff_hz);
            let right = smooth_envelope(&mut rng, n, fs, es.cutoff_hz);
            let attended: Vec<f64> = trials
                .iter()
                .flat_map(|t| {
                    let src = if t.label == AttentionLabel::Left {
                        &left
                    } else {
                        &right
                    };
                    src[t.start..t.end].iter().copied()
                })
                .collect();
            let mean = crate::math::mean(&attended);
            let k_len = (libm::round(es.response_s * fs) as usize).max(1);
            let kernel: Vec<f64> = (0..k_len)
                .map(|k| libm::sin(PI * (k as f64 + 0.5) / k_len as f64))
                .collect();
            let ksum: f64 = kernel.iter().sum();
            let response: Vec<f64> = (0..n)
                .map(|t| {
                    (0..k_len.min(t + 1))
                        .map(|k| kernel[k] / ksum * (attended[t - k] - mean))
                        .sum::<f64>()
                })
                .collect();
            for row in data.iter_mut().take(cfg.n_channels) {
                let mut weight: f64 = rng.random_range(-1.0..1.0);
                if weight.abs() < 0.2 {
                    weight = 0.2f64.copysign(weight);
                }
                for (x, r) in row.iter_mut().zip(&response) {
                    *x += es.gain * weight * r;
                }
            }
            Some([
                Envelope::new("left", fs, left)?,
                Envelope::new("right", fs, right)?,
            ])
        }
    };

    let mut channels: Vec<String> = montage.names().map(String::from).collect();
    channels.extend(cfg.reference_channels.iter().cloned());
    let recording = RawRecording::new(cfg.subject_id.clone(), fs, channels, data, trials)?;
    Ok(SyntheticSubject {
        recording,
        envelopes,
    })
}

/// Non-negative, slowly varying series: |two-pass one-pole lowpass of white noise|.
fn smooth_envelope(rng: &mut ChaCha8Rng, n: usize, fs: f64, cutoff_hz: f64) -> Vec<f64> {
    let a = libm::exp(-2.0 * PI * cutoff_hz / fs);
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    // Scale restores roughly unit variance after smoothing.
    let scale = libm::sqrt((1.0 + a) / (1.0 - a));
    (0..n)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            s1 = a * s1 + (1.0 - a) * x;
            s2 = a * s2 + (1.0 - a) * s1;
            (s2 * scale).abs()
        })
        .collect()
}
