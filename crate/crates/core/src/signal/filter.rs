//! Butterworth bandpass design (bilinear transform, second-order sections)
//! and forward-backward application.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::Band;
use crate::data::RawRecording;
use crate::{Error, Result};

/// Second-order section, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Sos {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2])
            / (self.a[0] + z_inv * self.a[1] + z2 * self.a[2])
    }
}

/// Digital Butterworth bandpass with `order` poles in total (`order / 2`
/// prototype poles), unit gain at the geometric band centre.
pub fn butterworth_bandpass(order: usize, band: Band, fs: f64) -> Result<Vec<Sos>> {
    if order < 2 || !order.is_multiple_of(2) {
        return Err(Error::InvalidConfig(alloc::format!(
            "bandpass order must be even and >= 2, got {order}"
        )));
    }
    band.check(fs)?;
    let n = order / 2;
    let fs2 = 2.0 * fs;
    let w1 = fs2 * libm::tan(PI * band.low / fs);
    let w2 = fs2 * libm::tan(PI * band.high / fs);
    let w0 = libm::sqrt(w1 * w2);
    let bw = w2 - w1;

    let mut poles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let t = p * (bw / 2.0);
        let disc = (t * t - w0 * w0).sqrt();
        for s in [t + disc, t - disc] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }

    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|z| z.im > 1e-12).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|z| z.im.abs() <= 1e-12)
        .map(|z| z.re)
        .collect();
    complex.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    real.sort_by(f64::total_cmp);

    let mut sections: Vec<Sos> = complex
        .iter()
        .map(|z| Sos {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -2.0 * z.re, z.norm_sqr()],
        })
        .collect();
    for pair in real.chunks(2) {
        let (r1, r2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        sections.push(Sos {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -(r1 + r2), r1 * r2],
        });
    }

    let wc = 2.0 * libm::atan(w0 / fs2);
    let z_inv = Complex64::from_polar(1.0, -wc);
    let gain = sections
        .iter()
        .map(|s| s.response(z_inv))
        .product::<Complex64>()
        .norm();
    let per = libm::pow(gain, -1.0 / sections.len() as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per;
        }
    }
    Ok(sections)
}

/// Direct form II transposed cascade with per-section state.
fn sosfilt(sos: &[Sos], x: &mut [f64], zi: &mut [[f64; 2]]) {
    for (s, z) in sos.iter().zip(zi.iter_mut()) {
        let [b0, b1, b2] = s.b;
        let [_, a1, a2] = s.a;
        let (mut z1, mut z2) = (z[0], z[1]);
        for v in x.iter_mut() {
            let xi = *v;
            let y = b0 * xi + z1;
            z1 = b1 * xi - a1 * y + z2;
            z2 = b2 * xi - a2 * y;
            *v = y;
        }
        *z = [z1, z2];
    }
}

/// Steady-state section states for a unit step at the cascade input.
fn sos_zi(sos: &[Sos]) -> Vec<[f64; 2]> {
    let mut scale = 1.0;
    sos.iter()
        .map(|s| {
            let g = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[1] + s.a[2]);
            let zi = [scale * (g - s.b[0]), scale * (s.b[2] - s.a[2] * g)];
            scale *= g;
            zi
        })
        .collect()
}

/// Edge padding used by [`filtfilt`]: three times the coefficient count.
pub fn pad_len(sos: &[Sos]) -> usize {
    3 * (2 * sos.len() + 1)
}

/// Zero-phase filtering: point-reflect pad both ends, filter forward with
/// steady-state initial conditions, filter the reversed result, drop padding.
pub fn filtfilt(sos: &[Sos], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad_len(sos).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let (first, last) = (x[0], x[n - 1]);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

    let zi = sos_zi(sos);
    let mut state: Vec<[f64; 2]> = zi.iter().map(|z| [z[0] * ext[0], z[1] * ext[0]]).collect();
    sosfilt(sos, &mut ext, &mut state);
    ext.reverse();
    let y0 = ext[0];
    let mut state: Vec<[f64; 2]> = zi.iter().map(|z| [z[0] * y0, z[1] * y0]).collect();
    sosfilt(sos, &mut ext, &mut state);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Zero-phase Butterworth bandpass of every channel, applied separately to each
/// trial and to each stretch between trials.
pub fn bandpass(rec: &RawRecording, band: Band, order: usize) -> Result<RawRecording> {
    let sos = butterworth_bandpass(order, band, rec.sample_rate)?;
    let n = rec.n_samples();
    let mut cuts: Vec<usize> = rec.trials.iter().flat_map(|t| [t.start, t.end]).collect();
    cuts.push(0);
    cuts.push(n);
    cuts.sort_unstable();
    cuts.dedup();
    let mut out = rec.clone();
    for row in &mut out.data {
        for seg in cuts.windows(2) {
            let filtered = filtfilt(&sos, &row[seg[0]..seg[1]]);
            row[seg[0]..seg[1]].copy_from_slice(&filtered);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AttentionLabel, Trial};
    use alloc::vec;

    fn magnitude(sos: &[Sos], f: f64, fs: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        sos.iter()
            .map(|s| s.response(z_inv))
            .product::<Complex64>()
            .norm()
    }

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| libm::sin(2.0 * PI * f * i as f64 / fs + 0.3))
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
    }

    #[test]
    fn half_power_at_band_edges() {
        for fs in [70.0, 128.0, 8192.0] {
            let sos = butterworth_bandpass(4, Band::ALPHA, fs).unwrap();
            assert_eq!(sos.len(), 2);
            for f in [8.0, 13.0] {
                let m = magnitude(&sos, f, fs);
                assert!((m - libm::sqrt(0.5)).abs() < 1e-9, "fs {fs} f {f}: {m}");
            }
            let w = |f: f64| 2.0 * fs * libm::tan(PI * f / fs);
            let fc = fs / PI * libm::atan(libm::sqrt(w(8.0) * w(13.0)) / (2.0 * fs));
            let centre = magnitude(&sos, fc, fs);
            assert!((centre - 1.0).abs() < 1e-12, "{centre}");
        }
    }

    #[test]
    fn passband_sinusoid_survives() {
        let fs = 256.0;
        let x = sine(10.5, fs, 20 * 256);
        let y = filtfilt(&butterworth_bandpass(4, Band::ALPHA, fs).unwrap(), &x);
        let edge = 2 * 256;
        let ratio = rms(&y[edge..x.len() - edge]) / rms(&x[edge..x.len() - edge]);
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn stopband_sinusoid_is_removed() {
        let fs = 256.0;
        let x = sine(2.0, fs, 20 * 256);
        let y = filtfilt(&butterworth_bandpass(4, Band::ALPHA, fs).unwrap(), &x);
        let edge = 2 * 256;
        assert!(rms(&y[edge..x.len() - edge]) < 0.05 * rms(&x[edge..x.len() - edge]));
    }

    #[test]
    fn zero_in_zero_out_and_length_kept() {
        let sos = butterworth_bandpass(4, Band::ALPHA, 100.0).unwrap();
        let y = filtfilt(&sos, &[0.0; 333]);
        assert_eq!(y.len(), 333);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn no_group_delay() {
        // Gaussian-windowed 10 Hz burst: cross-correlation peak must sit at lag 0.
        let fs = 128.0;
        let n = 1024;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = (i as f64 - 512.0) / fs;
                libm::exp(-t * t / 0.5) * libm::sin(2.0 * PI * 10.0 * t)
            })
            .collect();
        let y = filtfilt(&butterworth_bandpass(4, Band::ALPHA, fs).unwrap(), &x);
        let xc = |lag: isize| -> f64 {
            (0..n as isize)
                .filter(|i| (0..n as isize).contains(&(i + lag)))
                .map(|i| x[i as usize] * y[(i + lag) as usize])
                .sum()
        };
        let best = (-20..=20).max_by(|a, b| xc(*a).total_cmp(&xc(*b))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn nyquist_violation_is_error() {
        assert!(matches!(
            butterworth_bandpass(4, Band::new(8.0, 40.0), 70.0),
            Err(Error::BandOutOfRange(_))
        ));
        assert!(butterworth_bandpass(3, Band::ALPHA, 70.0).is_err());
    }

    #[test]
    fn trials_are_filtered_independently() {
        // A step at the trial boundary must not leak into the other trial.
        let fs = 100.0;
        let mut x = vec![0.0; 400];
        for v in &mut x[200..] {
            *v = 5.0;
        }
        for v in &mut x[..200] {
            *v = 0.0;
        }
        let rec = RawRecording::new(
            "s",
            fs,
            vec!["a".into()],
            vec![x],
            vec![
                Trial {
                    start: 0,
                    end: 200,
                    label: AttentionLabel::Left,
                },
                Trial {
                    start: 200,
                    end: 400,
                    label: AttentionLabel::Right,
                },
            ],
        )
        .unwrap();
        let out = bandpass(&rec, Band::ALPHA, 4).unwrap();
        assert!(out.data[0][..200].iter().all(|v| *v == 0.0));
        assert!(out.data[0][200..].iter().all(|v| v.abs() < 1e-9));
    }
}
