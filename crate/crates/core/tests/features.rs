use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ssf_core::data::{AttentionLabel, DecisionWindow, Electrode, Montage, WindowOrigin};
use ssf_core::features::{
    azimuthal_equidistant, band_power, extract_ssf, fft_len, project_electrodes, FeatureConfig,
    MapInterpolator, SsfExtractor,
};
use ssf_core::signal::Band;

fn naive_band_power(x: &[f64], fs: f64, band: Band) -> f64 {
    let w = x.len();
    let n = fft_len(w);
    let mean = x.iter().sum::<f64>() / w as f64;
    let (mut sum, mut count) = (0.0, 0);
    for k in 0..=n / 2 {
        let f = k as f64 * fs / n as f64;
        if f < band.low || f > band.high {
            continue;
        }
        let xk: Complex64 = x
            .iter()
            .enumerate()
            .map(|(t, v)| Complex64::from_polar(*v - mean, -2.0 * PI * (k * t) as f64 / n as f64))
            .sum();
        sum += xk.norm_sqr() / (w * w) as f64;
        count += 1;
    }
    sum / count as f64
}

#[test]
fn band_power_matches_naive_dft_for_all_short_lengths() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for w in 2..=128 {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..w).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let fast = band_power(&rows, 70.0, Band::ALPHA).unwrap();
        for (row, p) in rows.iter().zip(&fast) {
            let slow = naive_band_power(row, 70.0, Band::ALPHA);
            assert!((p - slow).abs() <= 1e-10 * slow, "W={w}: {p} vs {slow}");
        }
    }
}

#[test]
fn ten_hertz_tone_one_second() {
    let x: Vec<f64> = (0..70)
        .map(|t| (2.0 * PI * 10.0 * t as f64 / 70.0).sin())
        .collect();
    let p = band_power(std::slice::from_ref(&x), 70.0, Band::ALPHA).unwrap()[0];
    let o = naive_band_power(&x, 70.0, Band::ALPHA);
    assert!((p - o).abs() < 1e-10 * o);
}

#[test]
fn projection_preserves_distance_and_azimuth() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let p = [v[0] / r, v[1] / r, v[2] / r];
        let [u, w] = azimuthal_equidistant(p);
        assert!((u.hypot(w) - p[2].acos()).abs() < 1e-12);
        assert!((w.atan2(u) - p[1].atan2(p[0])).abs() < 1e-12);
    }
}

fn random_montage(rng: &mut ChaCha8Rng, n: usize) -> Montage {
    let entries = (0..n)
        .map(|i| {
            let theta: f64 = rng.random_range(0.0..1.9);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            Electrode {
                name: format!("E{i}"),
                x: theta.sin() * phi.cos(),
                y: theta.sin() * phi.sin(),
                z: theta.cos(),
            }
        })
        .collect();
    Montage::new(entries).unwrap()
}

#[test]
fn random_montages_reproduce_constant_and_affine_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.random_range(16..=64);
        let layout = project_electrodes(&random_montage(&mut rng, n)).unwrap();
        let area: f64 = (0..layout.triangles.len())
            .map(|t| layout.triangle_area(t))
            .sum();
        assert!((area - layout.hull_area()).abs() < 1e-9);
        assert!((0..layout.triangles.len()).all(|t| layout.triangle_area(t) > 0.0));
        assert!(layout.neighbors.iter().all(|nb| !nb.is_empty()));

        let interp = MapInterpolator::new(layout.clone(), 32).unwrap();
        let c = rng.random_range(-5.0..5.0);
        let m = interp.map(&vec![c; n], true).unwrap();
        let (a, b, d) = (
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let affine: Vec<f64> = layout
            .points
            .iter()
            .map(|p| a * p[0] + b * p[1] + d)
            .collect();
        let ma = interp.map(&affine, true).unwrap();
        let mut inside = 0;
        for r in 0..32 {
            for col in 0..32 {
                let centre = ssf_core::features::cell_centre(interp.extent(), 32, r, col);
                if interp.is_inside(r, col) {
                    inside += 1;
                    assert!((m.get(r, col) - c).abs() < 1e-9);
                    let truth = a * centre[0] + b * centre[1] + d;
                    assert!((ma.get(r, col) - truth).abs() < 1e-6);
                } else {
                    assert_eq!(m.get(r, col), 0.0);
                }
            }
        }
        assert!(inside > 300);
    }
}

#[test]
fn guarded_maps_stay_within_data_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let n = rng.random_range(16..=64);
        let layout = project_electrodes(&random_montage(&mut rng, n)).unwrap();
        let interp = MapInterpolator::new(layout, 32).unwrap();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let (lo, hi) = v
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(*x), b.max(*x)));
        let m = interp.map(&v, true).unwrap();
        for r in 0..32 {
            for c in 0..32 {
                if interp.is_inside(r, c) {
                    assert!(m.get(r, c) >= lo - 1e-9 && m.get(r, c) <= hi + 1e-9);
                }
            }
        }
    }
}

#[test]
fn maps_are_linear_without_guard() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layout = project_electrodes(&random_montage(&mut rng, 40)).unwrap();
    let interp = MapInterpolator::new(layout, 32).unwrap();
    let a: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (alpha, beta) = (2.5, -0.75);
    let mix: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| alpha * x + beta * y)
        .collect();
    let (ma, mb, mm) = (
        interp.map(&a, false).unwrap(),
        interp.map(&b, false).unwrap(),
        interp.map(&mix, false).unwrap(),
    );
    for k in 0..32 * 32 {
        assert!((mm.grid[k] - (alpha * ma.grid[k] + beta * mb.grid[k])).abs() < 1e-9);
    }
}

fn window(samples: Vec<Vec<f64>>, fs: f64) -> DecisionWindow {
    DecisionWindow {
        subject_id: "S".into(),
        sample_rate: fs,
        samples,
        label: AttentionLabel::Right,
        origin: WindowOrigin { trial: 0, start: 0 },
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("E{i}")).collect()
}

#[test]
fn single_map_and_identical_halves() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let montage = random_montage(&mut rng, 20);
    let half: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..35).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let full: Vec<Vec<f64>> = half
        .iter()
        .map(|r| [r.as_slice(), r.as_slice()].concat())
        .collect();
    let w = window(full, 70.0);

    let one = SsfExtractor::new(&montage, &names(20), FeatureConfig::default()).unwrap();
    let t1 = extract_ssf(&w, &one).unwrap();
    assert_eq!(
        (t1.n_maps, t1.data.len(), t1.label),
        (1, 1024, AttentionLabel::Right)
    );
    let direct = one
        .interpolator()
        .map(&band_power(&w.samples, 70.0, Band::ALPHA).unwrap(), true)
        .unwrap();
    assert!(t1
        .data
        .iter()
        .zip(&direct.grid)
        .all(|(a, b)| *a == *b as f32));

    let two = SsfExtractor::new(
        &montage,
        &names(20),
        FeatureConfig {
            sub_windows: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let t2 = extract_ssf(&w, &two).unwrap();
    assert_eq!(t2.n_maps, 2);
    assert!((0..1024).all(|k| (t2.data[k] - t2.data[1024 + k]).abs() < 1e-9));

    let many = SsfExtractor::new(
        &montage,
        &names(20),
        FeatureConfig {
            sub_windows: 40,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(extract_ssf(&w, &many).is_err());
    assert!(SsfExtractor::new(&montage, &names(19), FeatureConfig::default()).is_err());
}

/// Sub-window powers of a stationary alpha process against the spread of the
/// same statistic over independent draws of the process.
#[test]
fn sub_window_powers_follow_monte_carlo_distribution() {
    let fs = 70.0;
    let process = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
        let phase = rng.random_range(0.0..2.0 * PI);
        (0..len)
            .map(|t| {
                (2.0 * PI * 10.0 * t as f64 / fs + phase).sin()
                    + 0.5 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mc: Vec<f64> = (0..4000)
        .map(|_| band_power(&[process(&mut rng, 7)], fs, Band::ALPHA).unwrap()[0])
        .collect();
    let mean = mc.iter().sum::<f64>() / mc.len() as f64;
    let sd =
        (mc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (mc.len() - 1) as f64).sqrt();
    let mut sorted = mc.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[2], sorted[sorted.len() - 3]);

    let montage = random_montage(&mut rng, 24);
    let ex = SsfExtractor::new(
        &montage,
        &names(24),
        FeatureConfig {
            sub_windows: 10,
            ..Default::default()
        },
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = (0..24).map(|_| process(&mut rng, 70)).collect();
    let w = window(rows, fs);
    let mut all = Vec::new();
    for k in 0..10 {
        let p = ex.powers(&w, 7 * k, 7 * (k + 1)).unwrap();
        assert!(
            p.iter().all(|v| *v >= lo && *v <= hi),
            "sub-window {k} outside the simulated range"
        );
        all.extend(p);
    }
    let sub_mean = all.iter().sum::<f64>() / all.len() as f64;
    // the sub-window phases within a channel are dependent; allow 5 sd of a 24-channel mean
    assert!(
        (sub_mean - mean).abs() < 5.0 * sd / (24f64).sqrt(),
        "{sub_mean} vs {mean}"
    );
    assert_eq!(extract_ssf(&w, &ex).unwrap().n_maps, 10);
}
