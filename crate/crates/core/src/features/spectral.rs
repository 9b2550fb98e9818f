//! Alpha band power per channel from a zero-padded FFT.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::fft::fft_in_place;
use crate::signal::Band;
use crate::{Error, Result};

/// Minimum transform length; keeps several bins inside 8-13 Hz at 70 Hz.
pub const MIN_FFT_LEN: usize = 128;

pub fn fft_len(w: usize) -> usize {
    w.max(MIN_FFT_LEN).next_power_of_two()
}

/// Indices `k <= N/2` with `low <= k * fs / N <= high`.
pub fn band_bins(n_fft: usize, fs: f64, band: Band) -> Result<core::ops::RangeInclusive<usize>> {
    let freq = |k: usize| k as f64 * fs / n_fft as f64;
    let bins: Vec<usize> = (0..=n_fft / 2)
        .filter(|&k| freq(k) >= band.low && freq(k) <= band.high)
        .collect();
    match (bins.first(), bins.last()) {
        (Some(&a), Some(&b)) => Ok(a..=b),
        _ => Err(Error::NoBinsInBand {
            low: band.low,
            high: band.high,
            n_fft,
        }),
    }
}

/// Mean of `|X_k|^2 / W^2` over in-band bins, one value per channel.
///
/// `segment` is `[n_channels][W]`. Each row has its mean removed (so the
/// window's DC level cannot leak into the band through the zero padding) and
/// is zero-padded to [`fft_len`]. A constant row has exactly zero power.
pub fn band_power<S: AsRef<[f64]>>(segment: &[S], fs: f64, band: Band) -> Result<Vec<f64>> {
    let w = segment.first().map_or(0, |r| r.as_ref().len());
    if w < 2 {
        return Err(Error::TooShort {
            needed: 2,
            found: w,
        });
    }
    band.check(fs)?;
    let n = fft_len(w);
    let bins = band_bins(n, fs, band)?;
    let norm = (w * w) as f64;
    let count = bins.clone().count() as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    segment
        .iter()
        .map(|row| {
            let row = row.as_ref();
            if row.len() != w {
                return Err(Error::ShapeMismatch {
                    what: "segment row".into(),
                    expected: w,
                    found: row.len(),
                });
            }
            if row.iter().all(|v| *v == row[0]) {
                return Ok(0.0);
            }
            let mean = row.iter().sum::<f64>() / w as f64;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(if i < w { row[i] - mean } else { 0.0 }, 0.0);
            }
            fft_in_place(&mut buf);
            Ok(buf[bins.clone()]
                .iter()
                .map(|x| x.norm_sqr() / norm)
                .sum::<f64>()
                / count)
        })
        .collect()
}
