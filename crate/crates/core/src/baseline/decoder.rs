use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::AttentionLabel;
use crate::math::{dot, pearson};
use crate::{Error, Result};

/// Post-stimulus lag span of the decoder.
pub const DEFAULT_LAG_S: f64 = 0.25;

/// Ridge values, as multiples of the mean autocovariance diagonal.
pub const LAMBDA_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

pub fn max_lag_samples(lag_s: f64, sample_rate: f64) -> usize {
    libm::round(lag_s * sample_rate) as usize
}

/// Weights over (channel, lag 0..=max_lag); `weights[c * n_lags + lag]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecoder {
    pub n_channels: usize,
    pub max_lag: usize,
    pub ridge_lambda: f64,
    pub weights: Vec<f64>,
}

impl LinearDecoder {
    pub fn n_lags(&self) -> usize {
        self.max_lag + 1
    }

    pub fn weight(&self, channel: usize, lag: usize) -> f64 {
        self.weights[channel * self.n_lags() + lag]
    }
}

/// Accumulated lagged autocovariance `R` and EEG-envelope cross-covariance `r`
/// over one or more contiguous segments.
#[derive(Debug, Clone)]
pub struct LaggedCovariance {
    n_channels: usize,
    max_lag: usize,
    auto: Vec<f64>,
    cross: Vec<f64>,
    samples: usize,
}

impl LaggedCovariance {
    pub fn new(n_channels: usize, max_lag: usize) -> Self {
        let dim = n_channels * (max_lag + 1);
        LaggedCovariance {
            n_channels,
            max_lag,
            auto: vec![0.0; dim * dim],
            cross: vec![0.0; dim],
            samples: 0,
        }
    }

    fn dim(&self) -> usize {
        self.n_channels * (self.max_lag + 1)
    }

    /// Rows of the lagged design used from this segment.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Adds one contiguous segment. Only start times `t` with every lagged
    /// sample `t + lag` inside the segment contribute.
    pub fn accumulate<S: AsRef<[f64]>>(&mut self, eeg: &[S], envelope: &[f64]) -> Result<()> {
        if eeg.len() != self.n_channels {
            return Err(Error::ShapeMismatch {
                what: "decoder channels".into(),
                expected: self.n_channels,
                found: eeg.len(),
            });
        }
        let t_len = envelope.len();
        for row in eeg {
            if row.as_ref().len() != t_len {
                return Err(Error::ShapeMismatch {
                    what: "EEG vs envelope length".into(),
                    expected: t_len,
                    found: row.as_ref().len(),
                });
            }
        }
        let l = self.max_lag;
        if t_len <= l {
            return Err(Error::TooShort {
                needed: l,
                found: t_len,
            });
        }
        let n = t_len - l;
        let n_lags = l + 1;
        let dim = self.dim();
        for c1 in 0..self.n_channels {
            let x1 = eeg[c1].as_ref();
            for c2 in c1..self.n_channels {
                let x2 = eeg[c2].as_ref();
                // Within one channel the negative shifts are the transpose of the positive ones.
                let first_delta = if c1 == c2 { 0 } else { -(l as isize) };
                for delta in first_delta..=(l as isize) {
                    let t1_first = (-delta).max(0) as usize;
                    let t1_last = (l as isize).min(l as isize - delta) as usize;
                    let t2_first = (t1_first as isize + delta) as usize;
                    // Sliding sum of x1[t + lag1] * x2[t + lag1 + delta] as lag1 advances.
                    let mut s = dot(&x1[t1_first..t1_first + n], &x2[t2_first..t2_first + n]);
                    for lag1 in t1_first..=t1_last {
                        if lag1 > t1_first {
                            let lag2 = (lag1 as isize + delta) as usize;
                            s += x1[lag1 - 1 + n] * x2[lag2 - 1 + n] - x1[lag1 - 1] * x2[lag2 - 1];
                        }
                        let lag2 = (lag1 as isize + delta) as usize;
                        let p = c1 * n_lags + lag1;
                        let q = c2 * n_lags + lag2;
                        self.auto[p * dim + q] += s;
                        if p != q {
                            self.auto[q * dim + p] += s;
                        }
                    }
                }
            }
            for lag in 0..n_lags {
                self.cross[c1 * n_lags + lag] += dot(&x1[lag..lag + n], &envelope[..n]);
            }
        }
        self.samples += n;
        Ok(())
    }

    /// Solves `(R + lambda * mean(diag R) * I) w = r`.
    pub fn solve(&self, lambda: f64) -> Result<LinearDecoder> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "ridge parameter must be non-negative, got {lambda}"
            )));
        }
        if self.samples == 0 {
            return Err(Error::Empty("covariance (no segments accumulated)"));
        }
        let dim = self.dim();
        let mean_diag = (0..dim).map(|i| self.auto[i * dim + i]).sum::<f64>() / dim as f64;
        let mut a = DMatrix::from_row_slice(dim, dim, &self.auto);
        for i in 0..dim {
            a[(i, i)] += lambda * mean_diag;
        }
        let max_diag = (0..dim).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
        let chol = a.cholesky().ok_or(Error::Singular)?;
        let l = chol.l_dirty();
        let min_pivot = (0..dim)
            .map(|i| l[(i, i)] * l[(i, i)])
            .fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-13 * max_diag) {
            return Err(Error::Singular);
        }
        let w = chol.solve(&DVector::from_column_slice(&self.cross));
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("decoder weights".into()));
        }
        Ok(LinearDecoder {
            n_channels: self.n_channels,
            max_lag: self.max_lag,
            ridge_lambda: lambda,
            weights: w.iter().copied().collect(),
        })
    }
}

/// Fits a decoder on one aligned EEG/envelope segment.
pub fn fit_decoder<S: AsRef<[f64]>>(
    eeg: &[S],
    envelope: &[f64],
    max_lag: usize,
    lambda: f64,
) -> Result<LinearDecoder> {
    let mut cov = LaggedCovariance::new(eeg.len(), max_lag);
    cov.accumulate(eeg, envelope)?;
    cov.solve(lambda)
}

/// `s(t) = sum_c sum_lag w(c, lag) * eeg(c, t + lag)` for `t < T - max_lag`.
pub fn reconstruct<S: AsRef<[f64]>>(decoder: &LinearDecoder, eeg: &[S]) -> Result<Vec<f64>> {
    if eeg.len() != decoder.n_channels {
        return Err(Error::ShapeMismatch {
            what: "decoder channels".into(),
            expected: decoder.n_channels,
            found: eeg.len(),
        });
    }
    let t_len = eeg.first().map_or(0, |r| r.as_ref().len());
    if t_len <= decoder.max_lag {
        return Err(Error::TooShort {
            needed: decoder.max_lag,
            found: t_len,
        });
    }
    let n = t_len - decoder.max_lag;
    let mut out = vec![0.0; n];
    for (c, row) in eeg.iter().enumerate() {
        let row = row.as_ref();
        for lag in 0..decoder.n_lags() {
            let w = decoder.weight(c, lag);
            if w != 0.0 {
                crate::math::axpy(w, &row[lag..lag + n], &mut out);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionDecision {
    pub label: AttentionLabel,
    pub r_left: f64,
    pub r_right: f64,
    /// Correlations were equal; the decision defaulted to `Left`.
    pub tie: bool,
}

/// Chooses the side whose envelope correlates more with the reconstruction.
pub fn decide_attention(
    reconstruction: &[f64],
    env_left: &[f64],
    env_right: &[f64],
) -> Result<AttentionDecision> {
    let n = reconstruction.len();
    if env_left.len() != n || env_right.len() != n {
        return Err(Error::ShapeMismatch {
            what: "reconstruction vs envelope length".into(),
            expected: n,
            found: if env_left.len() != n {
                env_left.len()
            } else {
                env_right.len()
            },
        });
    }
    if n < 3 {
        return Err(Error::TooShort {
            needed: 2,
            found: n,
        });
    }
    let degenerate = || Error::Degenerate("zero-variance series in correlation".into());
    let r_left = pearson(reconstruction, env_left).ok_or_else(degenerate)?;
    let r_right = pearson(reconstruction, env_right).ok_or_else(degenerate)?;
    let label = if r_right > r_left {
        AttentionLabel::Right
    } else {
        AttentionLabel::Left
    };
    Ok(AttentionDecision {
        label,
        r_left,
        r_right,
        tie: r_left == r_right,
    })
}

/// Picks the ridge value with the highest mean reconstruction correlation on
/// validation segments `(eeg, attended envelope)`.
pub fn select_lambda<S: AsRef<[f64]>>(
    cov: &LaggedCovariance,
    validation: &[(Vec<S>, Vec<f64>)],
    grid: &[f64],
) -> Result<LinearDecoder> {
    let mut best: Option<(f64, LinearDecoder)> = None;
    for &lambda in grid {
        let dec = match cov.solve(lambda) {
            Ok(d) => d,
            Err(Error::Singular) => continue,
            Err(e) => return Err(e),
        };
        let mut total = 0.0;
        let mut count = 0usize;
        for (eeg, env) in validation {
            let Ok(rec) = reconstruct(&dec, eeg) else {
                continue;
            };
            if let Some(r) = pearson(&rec, &env[..rec.len()]) {
                total += r;
                count += 1;
            }
        }
        let score = if count > 0 {
            total / count as f64
        } else {
            f64::NEG_INFINITY
        };
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, dec));
        }
    }
    best.map(|(_, d)| d).ok_or(Error::Singular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    /// Brute-force lagged design: rows t, columns (c, lag).
    fn naive_cov(eeg: &[Vec<f64>], env: &[f64], l: usize) -> (Vec<f64>, Vec<f64>) {
        let c = eeg.len();
        let dim = c * (l + 1);
        let n = env.len() - l;
        let mut r = vec![0.0; dim * dim];
        let mut x = vec![0.0; dim];
        for t in 0..n {
            let row: Vec<f64> = (0..dim)
                .map(|p| eeg[p / (l + 1)][t + p % (l + 1)])
                .collect();
            for p in 0..dim {
                x[p] += row[p] * env[t];
                for q in 0..dim {
                    r[p * dim + q] += row[p] * row[q];
                }
            }
        }
        (r, x)
    }

    #[test]
    fn sliding_covariance_matches_design_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eeg: Vec<Vec<f64>> = (0..3).map(|_| noise(&mut rng, 60)).collect();
        let env = noise(&mut rng, 60);
        let mut cov = LaggedCovariance::new(3, 4);
        cov.accumulate(&eeg, &env).unwrap();
        let (r, x) = naive_cov(&eeg, &env, 4);
        for (a, b) in cov.auto.iter().zip(&r) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in cov.cross.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_channel_gets_unit_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let eeg: Vec<Vec<f64>> = (0..4).map(|_| noise(&mut rng, 500)).collect();
        let env = eeg[0].clone();
        let d = fit_decoder(&eeg, &env, 0, 0.0).unwrap();
        assert!((d.weight(0, 0) - 1.0).abs() < 1e-8);
        for c in 1..4 {
            assert!(d.weight(c, 0).abs() < 1e-8);
        }
    }

    #[test]
    fn shifted_channel_gets_weight_at_lag_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let eeg: Vec<Vec<f64>> = (0..3).map(|_| noise(&mut rng, 400)).collect();
        // channel 0 is the envelope delayed by 3 samples
        let mut env = vec![0.0; 400];
        env[..397].copy_from_slice(&eeg[0][3..]);
        let d = fit_decoder(&eeg, &env, 5, 0.0).unwrap();
        for c in 0..3 {
            for lag in 0..6 {
                let want = if c == 0 && lag == 3 { 1.0 } else { 0.0 };
                assert!((d.weight(c, lag) - want).abs() < 1e-6, "c{c} lag{lag}");
            }
        }
        let rec = reconstruct(&d, &eeg).unwrap();
        assert!(pearson(&rec, &env[..rec.len()]).unwrap() > 0.999);
    }

    #[test]
    fn ridge_shrinks_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eeg: Vec<Vec<f64>> = (0..3).map(|_| noise(&mut rng, 300)).collect();
        let env: Vec<f64> = (0..300).map(|t| eeg[1][t] + 0.3 * eeg[2][t]).collect();
        let mut cov = LaggedCovariance::new(3, 2);
        cov.accumulate(&eeg, &env).unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [0.0, 1e-2, 1.0, 1e2, 1e4, 1e8] {
            let w = cov.solve(lambda).unwrap().weights;
            let norm = libm::sqrt(w.iter().map(|v| v * v).sum::<f64>());
            assert!(norm < prev);
            prev = norm;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn unregularized_fit_has_the_best_training_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let eeg: Vec<Vec<f64>> = (0..4).map(|_| noise(&mut rng, 600)).collect();
        let env: Vec<f64> = (0..600)
            .map(|t| if t + 2 < 600 { eeg[1][t + 2] - 0.5 * eeg[3][t] } else { 0.0 } + noise(&mut rng, 1)[0])
            .collect();
        let corr = |lambda: f64| {
            let d = fit_decoder(&eeg, &env, 4, lambda).unwrap();
            let rec = reconstruct(&d, &eeg).unwrap();
            pearson(&rec, &env[..rec.len()]).unwrap()
        };
        let best = corr(0.0);
        for lambda in [1e-3, 1e-1, 1.0, 10.0, 1e3] {
            assert!(corr(lambda) <= best + 1e-12, "lambda {lambda}");
        }
    }

    #[test]
    fn duplicate_channels_are_singular_without_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = noise(&mut rng, 200);
        let eeg = vec![a.clone(), a.clone()];
        assert_eq!(fit_decoder(&eeg, &a, 1, 0.0), Err(Error::Singular));
        assert!(fit_decoder(&eeg, &a, 1, 1e-3).is_ok());
    }

    #[test]
    fn reconstruct_is_linear_and_zero_for_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = LinearDecoder {
            n_channels: 2,
            max_lag: 3,
            ridge_lambda: 0.0,
            weights: noise(&mut rng, 8),
        };
        let a: Vec<Vec<f64>> = (0..2).map(|_| noise(&mut rng, 50)).collect();
        let b: Vec<Vec<f64>> = (0..2).map(|_| noise(&mut rng, 50)).collect();
        let ab: Vec<Vec<f64>> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
            .collect();
        let (ra, rb, rab) = (
            reconstruct(&d, &a).unwrap(),
            reconstruct(&d, &b).unwrap(),
            reconstruct(&d, &ab).unwrap(),
        );
        for i in 0..rab.len() {
            assert!((rab[i] - ra[i] - rb[i]).abs() < 1e-9);
        }
        let zero = LinearDecoder {
            weights: vec![0.0; 8],
            ..d.clone()
        };
        assert!(reconstruct(&zero, &a).unwrap().iter().all(|v| *v == 0.0));
        assert!(matches!(
            reconstruct(&d, &[vec![0.0; 3], vec![0.0; 3]]),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn decision_follows_correlation_and_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = noise(&mut rng, 100);
        let r = noise(&mut rng, 100);
        let d = decide_attention(&l, &l, &r).unwrap();
        assert_eq!(d.label, AttentionLabel::Left);
        assert!((d.r_left - 1.0).abs() < 1e-12);
        assert_eq!(
            decide_attention(&l, &r, &l).unwrap().label,
            AttentionLabel::Right
        );
        let tie = decide_attention(&l, &r, &r).unwrap();
        assert!(tie.tie && tie.label == AttentionLabel::Left);
        assert!(decide_attention(&[1.0; 10], &l[..10], &r[..10]).is_err());
    }

    #[test]
    fn uncorrelated_noise_gives_small_correlations() {
        // Null oracle: over 200 independent draws of length 1000, |r| exceeds
        // 4 / sqrt(n) essentially never.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bound = 4.0 / libm::sqrt(1000.0);
        for _ in 0..200 {
            let s = noise(&mut rng, 1000);
            let l = noise(&mut rng, 1000);
            let r = noise(&mut rng, 1000);
            let d = decide_attention(&s, &l, &r).unwrap();
            assert!(d.r_left.abs() < bound && d.r_right.abs() < bound);
        }
    }
}
