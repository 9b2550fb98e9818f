//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc kernel.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::Band;
use crate::data::{RawRecording, Trial};
use crate::math::round_to_usize;
use crate::{Error, Result};

const KAISER_BETA: f64 = 8.6;
/// Zero crossings of the kernel on each side, counted at the lower rate.
const HALF_ZERO_CROSSINGS: f64 = 32.0;
const MAX_UP: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum, mut k) = (1.0, 1.0, 1.0);
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        libm::sin(PI * x) / (PI * x)
    }
}

/// Polyphase kernel for an `up / down` rate change.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    half: usize,
    /// `up` phases of `2 * half` taps, tap `t` weighting input `base + 1 - half + t`.
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    /// Ratio from rates rounded to millihertz.
    pub fn new(from_hz: f64, to_hz: f64) -> Result<Self> {
        if !(from_hz > 0.0 && to_hz > 0.0 && from_hz.is_finite() && to_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bad resampling rates {from_hz} -> {to_hz}"
            )));
        }
        let a = libm::round(from_hz * 1000.0) as u64;
        let b = libm::round(to_hz * 1000.0) as u64;
        let g = gcd(a, b);
        let (up, down) = (b / g, a / g);
        if up > MAX_UP {
            return Err(Error::InvalidConfig(format!(
                "resampling ratio {up}/{down} needs more than {MAX_UP} phases"
            )));
        }
        Ok(Self::from_ratio(up as usize, down as usize))
    }

    fn from_ratio(up: usize, down: usize) -> Self {
        let fc = (up as f64 / down as f64).min(1.0);
        let half = libm::ceil(HALF_ZERO_CROSSINGS / fc) as usize;
        let i0b = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (0..2 * half)
                    .map(|t| {
                        // distance from the output instant to input sample
                        let d = frac + (half - 1) as f64 - t as f64;
                        let r = d / half as f64;
                        if r.abs() >= 1.0 {
                            return 0.0;
                        }
                        let w = bessel_i0(KAISER_BETA * libm::sqrt(1.0 - r * r)) / i0b;
                        fc * sinc(fc * d) * w
                    })
                    .collect();
                let s: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|v| *v /= s);
                taps
            })
            .collect();
        Resampler {
            up,
            down,
            half,
            phases,
        }
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn output_len(&self, n: usize) -> usize {
        round_to_usize(n as f64 * self.up as f64 / self.down as f64)
    }

    /// Maps a sample index at the input rate to the output rate.
    pub fn map_index(&self, i: usize) -> usize {
        self.output_len(i)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if self.up == self.down || n == 0 {
            return x.to_vec();
        }
        let last = (n - 1) as isize;
        let at = |i: isize| -> f64 {
            if i < 0 {
                2.0 * x[0] - x[(-i).min(last) as usize]
            } else if i > last {
                2.0 * x[last as usize] - x[(2 * last - i).max(0) as usize]
            } else {
                x[i as usize]
            }
        };
        (0..self.output_len(n))
            .map(|j| {
                let pos = j * self.down;
                let base = (pos / self.up) as isize;
                let taps = &self.phases[pos % self.up];
                let first = base + 1 - self.half as isize;
                if first >= 0 && first + taps.len() as isize <= n as isize {
                    crate::math::dot(taps, &x[first as usize..first as usize + taps.len()])
                } else {
                    taps.iter()
                        .enumerate()
                        .map(|(t, w)| w * at(first + t as isize))
                        .sum()
                }
            })
            .collect()
    }
}

/// One-shot resampling of a single series.
pub fn resample_series(x: &[f64], from_hz: f64, to_hz: f64) -> Result<Vec<f64>> {
    Ok(Resampler::new(from_hz, to_hz)?.apply(x))
}

/// Resamples every channel and rescales trial bounds. With `band` given the
/// target rate must exceed twice its upper edge.
pub fn resample(rec: &RawRecording, target_rate: f64, band: Option<Band>) -> Result<RawRecording> {
    if let Some(b) = band {
        if target_rate <= 2.0 * b.high {
            return Err(Error::BandOutOfRange(format!(
                "target rate {target_rate} Hz must exceed {} Hz",
                2.0 * b.high
            )));
        }
    }
    let rs = Resampler::new(rec.sample_rate, target_rate)?;
    let data = rec.data.iter().map(|row| rs.apply(row)).collect();
    let trials = rec
        .trials
        .iter()
        .map(|t| Trial {
            start: rs.map_index(t.start),
            end: rs.map_index(t.end),
            label: t.label,
        })
        .collect();
    RawRecording::new(
        rec.subject_id.clone(),
        target_rate,
        rec.channels.clone(),
        data,
        trials,
    )
}
