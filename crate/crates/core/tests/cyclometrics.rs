use plcnoise::cyclometrics::{
    autocorr, covariance, csc, csd, csd_of, exceedance_stats, feature_table, feature_vector, fid,
    matrix_from_rows, max_coeff_distribution, pca_fit, pca_project, spectrogram, CyclicGrid,
};
use plcnoise::rng::rng_gaussian;
use plcnoise::synth::{gen_fresh, presets};
use plcnoise::{NoiseTrace, Rng, TraceSet};

const FS: f64 = 400_000.0;

fn white(seed: u64, n: usize) -> Vec<f64> {
    rng_gaussian(&mut Rng::new(seed), n, 0.0, 1.0).unwrap()
}

fn white_set(seed: u64, count: usize, len: usize, std: f64) -> TraceSet {
    let rng = Rng::new(seed);
    let traces = (0..count)
        .map(|i| {
            let s = rng_gaussian(&mut rng.substream(i as u64), len, 0.0, std).unwrap();
            NoiseTrace::from_f64(&s, FS).unwrap()
        })
        .collect();
    TraceSet::new("white", traces).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn normal_moments_of_a_million_samples() {
    let t = NoiseTrace::from_f64(&white(5, 1_000_000), FS).unwrap();
    let f = feature_vector(&t, 0.05).unwrap();
    assert!(f.skewness.abs() <= 0.01, "skew {}", f.skewness);
    assert!((f.kurtosis - 3.0).abs() <= 0.05, "kurt {}", f.kurtosis);
    assert!((f.std_dev - 1.0).abs() <= 0.005, "std {}", f.std_dev);
}

#[test]
fn white_noise_autocorrelation_is_small() {
    let t = NoiseTrace::from_f64(&white(6, 100_000), FS).unwrap();
    let r = autocorr(&t).unwrap();
    assert!((r[0] - 1.0).abs() < 1e-12);
    for (k, v) in r.iter().enumerate().take(101).skip(1) {
        assert!(v.abs() <= 0.02, "r[{k}] = {v}");
    }
}

#[test]
fn white_noise_psd_is_flat() {
    let s = white(7, 1_000_000);
    let spec = csd_of(&s, FS, &[0.0], 1024).unwrap();
    let band: Vec<f64> = spec
        .freqs
        .iter()
        .zip(&spec.csd[0])
        .filter(|(f, _)| **f >= 0.05 * FS && **f <= 0.45 * FS)
        .map(|(_, c)| c.re)
        .collect();
    let mean = band.iter().sum::<f64>() / band.len() as f64;
    for p in &band {
        let db = 10.0 * (p / mean).log10();
        assert!(db.abs() <= 1.5, "{db} dB");
    }
    // unit-variance white noise has two-sided density 1/fs
    assert!((mean * FS - 1.0).abs() < 0.02, "level {}", mean * FS);
}

#[test]
fn white_noise_has_no_cyclic_coherence() {
    let s = white(8, 1_000_000);
    let spec = csc(csd_of(&s, FS, &[0.0, 122.0], 4096).unwrap());
    let c = spec.csc.as_ref().unwrap();
    let mags: Vec<f64> = c[1].iter().map(|v| v.norm()).collect();
    assert!(median(mags) <= 0.1);
}

#[test]
fn coherence_bounds_and_masking() {
    let set = gen_fresh(&presets::dataset2_like(), 2, 16384, &Rng::new(1)).unwrap();
    let spec = csc(csd(&set.traces()[0], &[0.0, 122.0, 244.0], 3328).unwrap());
    let c = spec.csc.as_ref().unwrap();
    for (r, row) in c.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            assert!(v.norm() <= 1.0 + 1e-6);
            if r == 0 && spec.valid[0][k] {
                assert!((v.norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    // a periodic-Hann window spreads an on-bin sine over three bins only,
    // so every other bin carries round-off power and must be masked
    let s: Vec<f64> = (0..4096)
        .map(|n| (2.0 * std::f64::consts::PI * 16.0 * n as f64 / 256.0).cos())
        .collect();
    let spec = csc(csd_of(&s, FS, &[0.0], 256).unwrap());
    let near_zero = spec.psd_plus[0]
        .iter()
        .zip(&spec.psd_minus[0])
        .filter(|(p, m)| {
            let peak = spec.psd_plus[0].iter().cloned().fold(0.0, f64::max);
            p.min(**m) < plcnoise::cyclometrics::MASK_FRACTION * peak
        })
        .count();
    assert!(near_zero > 0);
    assert_eq!(spec.masked_count(), near_zero);
}

#[test]
fn fresh_coherence_is_at_the_cycle_frequency() {
    let set = gen_fresh(&presets::dataset2_like(), 16, 16384, &Rng::new(2)).unwrap();
    let band = |alpha: f64| {
        let mut total = 0.0;
        for t in set.traces() {
            let spec = csd(t, &[alpha], 4096).unwrap();
            total += spec
                .freqs
                .iter()
                .zip(&spec.csd[0])
                .filter(|(f, _)| (20e3..40e3).contains(*f))
                .map(|(_, c)| c.norm())
                .sum::<f64>();
        }
        total
    };
    let (on, off) = (band(122.0), band(103.0));
    assert!(on > off, "on-cycle {on} vs off-cycle {off}");
}

#[test]
fn exceedance_of_single_segment_traces_is_total() {
    // one segment per trace makes |C| = 1 on every valid bin
    // every segment identical (period = hop) and α·hop/fs integral makes
    // each segment's cross term phase-aligned, so |C| = 1 exactly
    let rng = Rng::new(3);
    let traces = (0..4)
        .map(|i| {
            let period = rng_gaussian(&mut rng.substream(i), 128, 0.0, 1.0).unwrap();
            let s: Vec<f64> = period.iter().cycle().take(1024).copied().collect();
            NoiseTrace::from_f64(&s, FS).unwrap()
        })
        .collect();
    let set = TraceSet::new("periodic", traces).unwrap();
    let grid = CyclicGrid {
        alphas: vec![3125.0, 6250.0],
        nfft: 256,
        f_range: (0.0, 200_000.0),
    };
    let pct = exceedance_stats(&set, &grid, 0.5).unwrap();
    for p in pct {
        assert!((p - 100.0).abs() < 1e-9, "{p}");
    }
    for t in set.traces() {
        let spec = csc(csd(t, &grid.alphas, 256).unwrap());
        for (r, row) in spec.csc.as_ref().unwrap().iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if spec.valid[r][k] {
                    assert!((v.norm() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn white_noise_rarely_exceeds_high_threshold() {
    let set = white_set(4, 16, 16384, 1.0);
    let grid = CyclicGrid {
        alphas: (1..=6).map(|h| 122.0 * h as f64).collect(),
        nfft: 3328,
        f_range: (0.0, 200_000.0),
    };
    for p in exceedance_stats(&set, &grid, 0.9).unwrap() {
        assert!(p <= 5.0, "{p}%");
    }
}

#[test]
fn identical_traces_share_one_band() {
    let t = NoiseTrace::from_f64(&white(10, 8192), FS).unwrap();
    let set = TraceSet::new("same", vec![t; 5]).unwrap();
    let bands: Vec<(f64, f64)> = (0..8).map(|i| (i as f64 * 25e3, (i + 1) as f64 * 25e3)).collect();
    let pct = max_coeff_distribution(&set, 122.0, 4096, &bands).unwrap();
    assert_eq!(pct.iter().filter(|p| **p == 100.0).count(), 1);
    assert_eq!(pct.iter().filter(|p| **p == 0.0).count(), 7);
}

#[test]
fn band_edge_goes_to_the_band_starting_there() {
    let t = NoiseTrace::from_f64(&white(11, 8192), FS).unwrap();
    let spec = csc(csd(&t, &[122.0], 4096).unwrap());
    let c = spec.csc.as_ref().unwrap();
    let (k, _) = c[0]
        .iter()
        .enumerate()
        .filter(|(k, _)| spec.valid[0][*k] && spec.freqs[*k] < 200_000.0)
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap();
    let edge = spec.freqs[k];
    let set = TraceSet::new("one", vec![t]).unwrap();
    let pct = max_coeff_distribution(&set, 122.0, 4096, &[(0.0, edge), (edge, 200_000.0)]).unwrap();
    assert_eq!(pct, vec![0.0, 100.0]);
}

/// FRESH shapes the spectrum first and the time envelope second, so the
/// cyclic density follows the 30 kHz peak while the coherence (density over
/// power) is flat across the occupied band.
#[test]
fn fresh_peak_band_holds_the_density_majority() {
    let set = gen_fresh(&presets::dataset2_like(), 32, 16384, &Rng::new(12)).unwrap();
    let bands: Vec<(f64, f64)> = (0..8).map(|i| (i as f64 * 25e3, (i + 1) as f64 * 25e3)).collect();
    let peak_band = 1;
    let mut density_hits = 0;
    for t in set.traces() {
        let spec = csd(t, &[122.0], 3328).unwrap();
        let k = (0..spec.freqs.len())
            .filter(|&k| spec.freqs[k] < 200e3)
            .max_by(|&a, &b| spec.csd[0][a].norm().total_cmp(&spec.csd[0][b].norm()))
            .unwrap();
        let (lo, hi) = bands[peak_band];
        density_hits += usize::from(spec.freqs[k] >= lo && spec.freqs[k] < hi);
    }
    assert!(density_hits * 2 > set.count(), "{density_hits} of {}", set.count());

    let pct = max_coeff_distribution(&set, 122.0, 3328, &bands).unwrap();
    assert!((pct.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    assert!(pct.iter().all(|p| *p < 50.0), "{pct:?}");
}

fn random_rows(seed: u64, n: usize) -> Vec<[f64; 8]> {
    let mut rng = Rng::new(seed);
    // correlated columns with distinct scales
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..8).map(|_| rng.next_normal()).collect();
            let mut r = [0.0; 8];
            for j in 0..8 {
                r[j] = (j + 1) as f64 * z[j] + 0.5 * z[(j + 1) % 8] + j as f64;
            }
            r
        })
        .collect()
}

#[test]
fn pca_diagonalizes_and_reconstructs() {
    let x = matrix_from_rows(&random_rows(13, 1000));
    let m = pca_fit(&x).unwrap();
    let v = m.eigenvector_matrix();
    let vtv = v.transpose() * &v;
    for i in 0..8 {
        for j in 0..8 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((vtv[(i, j)] - want).abs() <= 1e-8);
        }
    }
    let scores = pca_project(&m, &x, 8).unwrap();
    let cs = covariance(&scores);
    let cx = covariance(&x);
    let scale = cx.trace();
    for i in 0..8 {
        for j in 0..8 {
            let want = if i == j { m.eigenvalues[i] } else { 0.0 };
            assert!((cs[(i, j)] - want).abs() <= 1e-8 * scale, "cov[{i},{j}]");
        }
    }
    assert!((m.eigenvalues.iter().sum::<f64>() - scale).abs() <= 1e-8 * scale);

    let back = &scores * v.transpose();
    for i in 0..x.nrows() {
        for j in 0..8 {
            let centered = x[(i, j)] - m.feature_means[j];
            assert!((back[(i, j)] - centered).abs() <= 1e-8);
        }
    }
}

#[test]
fn fid_of_a_set_with_itself_is_zero() {
    let x = matrix_from_rows(&random_rows(14, 500));
    assert!(fid(&x, &x).unwrap().abs() <= 1e-9);
}

/// Σx = I vs Σg = 4I in 2-D: Tr(I + 4I - 2·2I) = 2.
#[test]
fn fid_two_dimensional_closed_form() {
    // exact covariances: ±1 and ±2 on each axis, zero means
    let a: Vec<[f64; 2]> = vec![[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
    let scale = (4.0f64 / 3.0).sqrt();
    let x: Vec<[f64; 2]> = a.iter().map(|r| [r[0] / scale, r[1] / scale]).collect();
    let g: Vec<[f64; 2]> = x.iter().map(|r| [2.0 * r[0], 2.0 * r[1]]).collect();
    let (mx, mg) = (matrix_from_rows(&x), matrix_from_rows(&g));
    let cx = covariance(&mx);
    assert!((cx[(0, 0)] - 1.0).abs() < 1e-12 && cx[(0, 1)].abs() < 1e-12);
    let d = fid(&mx, &mg).unwrap();
    assert!((d - 2.0).abs() <= 1e-8, "{d}");

    // same value from an independent square root on a non-isotropic pair
    let y: Vec<[f64; 2]> = x.iter().map(|r| [r[0] + 0.5 * r[1], r[1]]).collect();
    let my = matrix_from_rows(&y);
    let (c1, c2) = (covariance(&mx), covariance(&my));
    let s = sqrt_2x2(&(&c1 * &c2));
    let oracle = c1.trace() + c2.trace() - 2.0 * s;
    assert!((fid(&mx, &my).unwrap() - oracle).abs() <= 1e-8);
}

/// Trace of the principal square root of a 2×2 matrix with positive
/// eigenvalues: sqrt(tr + 2 sqrt(det)).
fn sqrt_2x2(m: &nalgebra::DMatrix<f64>) -> f64 {
    (m.trace() + 2.0 * m.determinant().sqrt()).sqrt()
}

#[test]
fn spectrogram_of_a_sine_peaks_at_its_frequency() {
    let s: Vec<f64> = (0..16384)
        .map(|n| (2.0 * std::f64::consts::PI * 50e3 * n as f64 / FS).sin())
        .collect();
    let t = NoiseTrace::from_f64(&s, FS).unwrap();
    let sg = spectrogram(&t, 256, 128).unwrap();
    let bin = FS / 256.0;
    for row in &sg.magnitude {
        let k = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((sg.freqs[k] - 50e3).abs() <= bin);
    }

    let zero = NoiseTrace::from_f64(&vec![0.0; 4096], FS).unwrap();
    let sg = spectrogram(&zero, 256, 128).unwrap();
    assert!(sg.magnitude.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn spectrogram_parseval() {
    let (win, hop) = (256, 64);
    // zero margins give every nonzero sample full window coverage
    let mut s = white(15, 16384);
    s[..win].fill(0.0);
    let n = s.len();
    s[n - win..].fill(0.0);
    let t = NoiseTrace::from_f64(&s, FS).unwrap();
    let sg = spectrogram(&t, win, hop).unwrap();
    let wsq: f64 = (0..win)
        .map(|i| (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos()).powi(2))
        .sum();
    let mut spectral = 0.0;
    for row in &sg.magnitude {
        // one-sided rows: double everything except DC and Nyquist
        for (k, m) in row.iter().enumerate() {
            let twice = if k == 0 || k == row.len() - 1 { 1.0 } else { 2.0 };
            spectral += twice * m * m;
        }
    }
    // squared Hann at quarter-window hop sums to the constant Σw²/hop
    let est = spectral / win as f64 / (wsq / hop as f64);
    let energy: f64 = s.iter().map(|x| x * x).sum();
    assert!((est / energy - 1.0).abs() < 0.01, "{est} vs {energy}");
}

#[test]
fn feature_table_covers_every_trace() {
    let set = white_set(16, 7, 512, 0.3);
    let f = feature_table(&set, 0.05).unwrap();
    assert_eq!(f.len(), 7);
    assert!(f.iter().all(|v| v.values().iter().all(|x| x.is_finite())));
}
