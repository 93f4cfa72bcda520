use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::trace::{NoiseTrace, TraceSet};

pub const DEFAULT_PEAK_THRESH: f64 = 0.05;

/// Number of features in the PCA / FID basis (the peak count is excluded).
pub const BASIS_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureVector {
    pub max_v: f64,
    pub mean_v: f64,
    pub energy: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub peak_count: usize,
    pub acf_skewness: f64,
    pub acf_kurtosis: f64,
    pub thresh_volts: f64,
}

impl FeatureVector {
    pub const NAMES: [&'static str; 9] = [
        "max_v",
        "mean_v",
        "energy",
        "std_dev",
        "skewness",
        "kurtosis",
        "peak_count",
        "acf_skewness",
        "acf_kurtosis",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.max_v,
            self.mean_v,
            self.energy,
            self.std_dev,
            self.skewness,
            self.kurtosis,
            self.peak_count as f64,
            self.acf_skewness,
            self.acf_kurtosis,
        ]
    }

    /// The 8 features used for PCA and FID.
    pub fn basis(&self) -> [f64; BASIS_DIM] {
        [
            self.max_v,
            self.mean_v,
            self.energy,
            self.std_dev,
            self.skewness,
            self.kurtosis,
            self.acf_skewness,
            self.acf_kurtosis,
        ]
    }
}

/// Mean plus normalized third and fourth central moments (1/N convention).
struct Moments {
    mean: f64,
    m2: f64,
    skewness: f64,
    kurtosis: f64,
}

fn moments(x: &[f64]) -> Result<Moments> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if !(m2 > 0.0) || m2 < f64::EPSILON * f64::EPSILON * mean * mean {
        return Err(Error::DegenerateInput("sequence has zero variance".into()));
    }
    Ok(Moments {
        mean,
        m2,
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}

pub fn feature_vector(trace: &NoiseTrace, thresh: f64) -> Result<FeatureVector> {
    features_of(&trace.to_f64(), thresh)
}

pub fn features_of(s: &[f64], thresh: f64) -> Result<FeatureVector> {
    let n = s.len();
    if n < 4 {
        return Err(Error::Length(format!("features need at least 4 samples, got {n}")));
    }
    let m = moments(s)?;
    let r = autocorr_of(s)?;
    let acf = moments(&r[1..])?;
    Ok(FeatureVector {
        max_v: s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_v: m.mean,
        energy: s.iter().map(|v| v * v).sum::<f64>() / n as f64,
        std_dev: (m.m2 * n as f64 / (n - 1) as f64).sqrt(),
        skewness: m.skewness,
        kurtosis: m.kurtosis,
        peak_count: s.iter().filter(|v| v.abs() > thresh).count(),
        acf_skewness: acf.skewness,
        acf_kurtosis: acf.kurtosis,
        thresh_volts: thresh,
    })
}

/// Normalized autocorrelation `r_k = c_k / c_0` for lags `0..N`, where
/// `c_k = (1/N) Σ (s[n]−μ)(s[n+k]−μ)`.
pub fn autocorr(trace: &NoiseTrace) -> Result<Vec<f64>> {
    autocorr_of(&trace.to_f64())
}

pub fn autocorr_of(s: &[f64]) -> Result<Vec<f64>> {
    let n = s.len();
    if n < 2 {
        return Err(Error::Length(format!("autocorrelation needs at least 2 samples, got {n}")));
    }
    let mean = s.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(m);
    let mut buf: Vec<Complex64> = s
        .iter()
        .map(|&v| Complex64::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(m)
        .collect();
    fft.process(&mut buf);
    for v in &mut buf {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    // inverse via the forward transform of a real, even spectrum
    fft.process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 1e-300) {
        return Err(Error::DegenerateInput("constant trace has no autocorrelation".into()));
    }
    Ok(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Features of every trace in a set, in set order.
pub fn feature_table(set: &TraceSet, thresh: f64) -> Result<Vec<FeatureVector>> {
    set.traces()
        .par_iter()
        .map(|t| feature_vector(t, thresh))
        .collect()
}

/// Rows of the 8-feature basis, one per trace.
pub fn basis_rows(features: &[FeatureVector]) -> Vec<[f64; BASIS_DIM]> {
    features.iter().map(FeatureVector::basis).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_autocorr(s: &[f64]) -> Vec<f64> {
        let n = s.len();
        let mu = s.iter().sum::<f64>() / n as f64;
        let c = |k: usize| (0..n - k).map(|i| (s[i] - mu) * (s[i + k] - mu)).sum::<f64>() / n as f64;
        let c0 = c(0);
        (0..n).map(|k| c(k) / c0).collect()
    }

    #[test]
    fn alternating_sequence() {
        let s = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let f = features_of(&s, 0.05).unwrap();
        assert_eq!(f.max_v, 1.0);
        assert_eq!(f.mean_v, 0.0);
        assert_eq!(f.energy, 1.0);
        assert!(f.skewness.abs() < 1e-12);
        assert_eq!(f.peak_count, 8);
    }

    #[test]
    fn peak_count_uses_magnitude() {
        let f = features_of(&[0.1, -0.06, 0.01, 0.0], 0.05).unwrap();
        assert_eq!(f.peak_count, 2);
    }

    #[test]
    fn std_uses_sample_normalization() {
        let f = features_of(&[1.0, 2.0, 3.0, 4.0], 0.05).unwrap();
        assert!((f.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(f.kurtosis >= 1.0);
    }

    #[test]
    fn autocorr_matches_direct_sum() {
        let s: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).sin() + 0.3).collect();
        let a = autocorr_of(&s).unwrap();
        let b = direct_autocorr(&s);
        assert_eq!(a[0], 1.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn square_wave_autocorr_peaks_at_period() {
        let p = 16;
        let s: Vec<f64> = (0..512).map(|i| if (i % p) < p / 2 { 1.0 } else { -1.0 }).collect();
        let r = autocorr_of(&s).unwrap();
        assert!(r[p] > r[p - 1] && r[p] > r[p + 1]);
        assert!(r[p] > 0.95);
    }

    #[test]
    fn constant_trace_is_degenerate() {
        assert!(matches!(features_of(&[2.0; 8], 0.05), Err(Error::DegenerateInput(_))));
        assert!(matches!(autocorr_of(&[0.5; 8]), Err(Error::DegenerateInput(_))));
        assert!(matches!(features_of(&[1.0, 2.0], 0.05), Err(Error::Length(_))));
    }

    #[test]
    fn scale_covariance() {
        let s: Vec<f64> = (0..300).map(|i| ((i * i) as f64 * 0.01).sin()).collect();
        let c = 3.0;
        let t: Vec<f64> = s.iter().map(|v| v * c).collect();
        let a = features_of(&s, 0.05).unwrap();
        let b = features_of(&t, 0.05 * c).unwrap();
        assert!((b.max_v - c * a.max_v).abs() < 1e-12);
        assert!((b.std_dev - c * a.std_dev).abs() < 1e-12);
        assert!((b.energy - c * c * a.energy).abs() < 1e-10);
        assert!((b.skewness - a.skewness).abs() < 1e-10);
        assert!((b.kurtosis - a.kurtosis).abs() < 1e-10);
        assert_eq!(a.peak_count, b.peak_count);
    }

    #[test]
    fn autocorr_ignores_offset() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 * 0.7).cos()).collect();
        let t: Vec<f64> = s.iter().map(|v| v + 5.0).collect();
        for (x, y) in autocorr_of(&s).unwrap().iter().zip(autocorr_of(&t).unwrap()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
