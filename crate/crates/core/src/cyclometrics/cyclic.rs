//! Cyclic spectral density and coherence via the time-averaged cyclic
//! periodogram.
//!
//! For cyclic frequency `α` each Hann-windowed segment (length `nfft`, 50%
//! overlap) is transformed twice, after modulating the trace by
//! `exp(∓jπαn/fs)` on the global time axis. That yields `X(f+α/2)` and
//! `X(f−α/2)` on the ordinary bin grid, so
//!
//! ```text
//! S(α; f) = ⟨X(f+α/2) · conj X(f−α/2)⟩ / (fs · Σw²)
//! C(α; f) = S(α; f) / sqrt(⟨|X(f+α/2)|²⟩ · ⟨|X(f−α/2)|²⟩) / (fs · Σw²)
//! ```
//!
//! At `α = 0` the first line is the Welch PSD. Using the global time axis
//! keeps truly cyclic components phase-coherent across segments while
//! stationary leakage rotates and averages out.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::trace::{NoiseTrace, TraceSet};

/// Bins whose PSD factor is below this fraction of the peak PSD are masked.
pub const MASK_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicSpectrum {
    pub alphas: Vec<f64>,
    pub freqs: Vec<f64>,
    pub nfft: usize,
    pub segments: usize,
    /// `|alphas| × |freqs|`, row-major by α.
    pub csd: Vec<Vec<Complex64>>,
    /// Welch PSD at `f + α/2` and `f − α/2`, same layout as `csd`.
    pub psd_plus: Vec<Vec<f64>>,
    pub psd_minus: Vec<Vec<f64>>,
    /// Filled by [`csc`].
    pub csc: Option<Vec<Vec<Complex64>>>,
    /// `true` where the coherence is defined (both PSD factors non-negligible).
    pub valid: Vec<Vec<bool>>,
}

impl CyclicSpectrum {
    pub fn masked_count(&self) -> usize {
        self.valid.iter().flatten().filter(|v| !**v).count()
    }

    pub fn row(&self, alpha: f64) -> Option<usize> {
        self.alphas.iter().position(|&a| a == alpha)
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn check_resolution(alphas: &[f64], fs: f64, nfft: usize) -> Result<()> {
    let res = fs / nfft as f64;
    for &a in alphas {
        if !a.is_finite() || a < 0.0 || a > fs / 2.0 {
            return Err(Error::Resolution(format!(
                "cyclic frequency {a} Hz outside [0, {}] Hz",
                fs / 2.0
            )));
        }
        if a != 0.0 && a < res {
            return Err(Error::Resolution(format!(
                "cyclic frequency {a} Hz is below the segment resolution {res:.3} Hz (nfft {nfft})"
            )));
        }
    }
    Ok(())
}

/// Segment-averaged cyclic spectral density of one trace on the one-sided
/// bin grid `k·fs/nfft`, `k = 0..=nfft/2`.
pub fn csd(trace: &NoiseTrace, alphas: &[f64], nfft: usize) -> Result<CyclicSpectrum> {
    csd_of(&trace.to_f64(), trace.sample_rate_hz(), alphas, nfft)
}

pub fn csd_of(s: &[f64], fs: f64, alphas: &[f64], nfft: usize) -> Result<CyclicSpectrum> {
    if nfft < 4 || s.len() < 2 * nfft {
        return Err(Error::Length(format!(
            "cyclic analysis needs nfft >= 4 and trace length >= 2*nfft, got nfft {nfft}, length {}",
            s.len()
        )));
    }
    if alphas.is_empty() {
        return Err(Error::EmptyRange("no cyclic frequencies requested".into()));
    }
    check_resolution(alphas, fs, nfft)?;
    let hop = nfft / 2;
    let segments = (s.len() - nfft) / hop + 1;
    let w = hann(nfft);
    let norm = 1.0 / (segments as f64 * fs * w.iter().map(|v| v * v).sum::<f64>());
    let half = nfft / 2 + 1;
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut up = vec![Complex64::new(0.0, 0.0); nfft];
    let mut dn = vec![Complex64::new(0.0, 0.0); nfft];

    let mut csd_rows = Vec::with_capacity(alphas.len());
    let mut plus_rows = Vec::with_capacity(alphas.len());
    let mut minus_rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut acc = vec![Complex64::new(0.0, 0.0); half];
        let mut pp = vec![0.0; half];
        let mut pm = vec![0.0; half];
        for seg in 0..segments {
            let start = seg * hop;
            for i in 0..nfft {
                let n = (start + i) as f64;
                let v = s[start + i] * w[i];
                let rot = Complex64::from_polar(1.0, -PI * alpha * n / fs);
                up[i] = rot * v;
                dn[i] = rot.conj() * v;
            }
            fft.process_with_scratch(&mut up, &mut scratch);
            if alpha == 0.0 {
                dn.copy_from_slice(&up);
            } else {
                fft.process_with_scratch(&mut dn, &mut scratch);
            }
            for k in 0..half {
                acc[k] += up[k] * dn[k].conj();
                pp[k] += up[k].norm_sqr();
                pm[k] += dn[k].norm_sqr();
            }
        }
        csd_rows.push(acc.into_iter().map(|v| v * norm).collect());
        plus_rows.push(pp.into_iter().map(|v| v * norm).collect());
        minus_rows.push(pm.into_iter().map(|v| v * norm).collect());
    }
    let valid = vec![vec![true; half]; alphas.len()];
    Ok(CyclicSpectrum {
        alphas: alphas.to_vec(),
        freqs: (0..half).map(|k| k as f64 * fs / nfft as f64).collect(),
        nfft,
        segments,
        csd: csd_rows,
        psd_plus: plus_rows,
        psd_minus: minus_rows,
        csc: None,
        valid,
    })
}

/// Normalizes the CSD into the spectral coherence and marks masked bins.
///
/// The mask threshold is relative to the largest PSD value over all rows.
pub fn csc(mut spectrum: CyclicSpectrum) -> CyclicSpectrum {
    let peak = spectrum
        .psd_plus
        .iter()
        .chain(&spectrum.psd_minus)
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    let floor = MASK_FRACTION * peak;
    let mut rows = Vec::with_capacity(spectrum.alphas.len());
    for (r, &alpha) in spectrum.alphas.iter().enumerate() {
        let mut row = Vec::with_capacity(spectrum.freqs.len());
        for k in 0..spectrum.freqs.len() {
            let (p, m) = (spectrum.psd_plus[r][k], spectrum.psd_minus[r][k]);
            let ok = p > floor && m > floor;
            spectrum.valid[r][k] = ok;
            row.push(if !ok {
                Complex64::new(0.0, 0.0)
            } else if alpha == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                spectrum.csd[r][k] / (p * m).sqrt()
            });
        }
        rows.push(row);
    }
    spectrum.csc = Some(rows);
    spectrum
}

/// Coherence magnitudes of one α row restricted to `f_range = [lo, hi)`,
/// valid bins only.
fn coherence_in_range(spec: &CyclicSpectrum, row: usize, f_range: (f64, f64)) -> Vec<(f64, f64)> {
    let csc = spec.csc.as_ref().expect("coherence computed");
    spec.freqs
        .iter()
        .enumerate()
        .filter(|(k, &f)| f >= f_range.0 && f < f_range.1 && spec.valid[row][*k])
        .map(|(k, &f)| (f, csc[row][k].norm()))
        .collect()
}

fn check_range(f_range: (f64, f64)) -> Result<()> {
    if !(f_range.0 < f_range.1) {
        return Err(Error::EmptyRange(format!(
            "frequency range [{}, {}) is empty",
            f_range.0, f_range.1
        )));
    }
    Ok(())
}

/// Analysis settings shared by the set-level statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicGrid {
    pub alphas: Vec<f64>,
    pub nfft: usize,
    pub f_range: (f64, f64),
}

/// Percentage of valid bins in `f_range` whose |coherence| exceeds `thresh`,
/// averaged over traces, for each α of the grid.
pub fn exceedance_stats(set: &TraceSet, grid: &CyclicGrid, thresh: f64) -> Result<Vec<f64>> {
    if !(thresh > 0.0 && thresh < 1.0) {
        return Err(Error::InvalidParam(format!("threshold must be in (0, 1), got {thresh}")));
    }
    check_range(grid.f_range)?;
    let per_trace: Vec<Vec<f64>> = set
        .traces()
        .par_iter()
        .map(|t| {
            let spec = csc(csd(t, &grid.alphas, grid.nfft)?);
            (0..grid.alphas.len())
                .map(|r| {
                    let c = coherence_in_range(&spec, r, grid.f_range);
                    if c.is_empty() {
                        return Err(Error::EmptyRange(format!(
                            "no valid bins in [{}, {}) Hz",
                            grid.f_range.0, grid.f_range.1
                        )));
                    }
                    Ok(c.iter().filter(|(_, m)| *m > thresh).count() as f64 / c.len() as f64)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = per_trace.len() as f64;
    Ok((0..grid.alphas.len())
        .map(|r| 100.0 * per_trace.iter().map(|p| p[r]).sum::<f64>() / n)
        .collect())
}

/// Share of traces (percent) whose coherence peak at `alpha` falls in each
/// half-open band `[lo, hi)`.
pub fn max_coeff_distribution(
    set: &TraceSet,
    alpha: f64,
    nfft: usize,
    bands: &[(f64, f64)],
) -> Result<Vec<f64>> {
    if bands.is_empty() {
        return Err(Error::EmptyRange("no bands given".into()));
    }
    for b in bands {
        check_range(*b)?;
    }
    let mut sorted = bands.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(Error::InvalidParam("bands overlap".into()));
    }
    let lo = sorted[0].0;
    let hi = sorted[sorted.len() - 1].1;
    let argmax: Vec<Option<f64>> = set
        .traces()
        .par_iter()
        .map(|t| {
            let spec = csc(csd(t, &[alpha], nfft)?);
            Ok(coherence_in_range(&spec, 0, (lo, hi))
                .into_iter()
                .fold(None, |best: Option<(f64, f64)>, (f, m)| match best {
                    Some((_, bm)) if bm >= m => best,
                    _ => Some((f, m)),
                })
                .map(|(f, _)| f))
        })
        .collect::<Result<_>>()?;
    let n = set.count() as f64;
    Ok(bands
        .iter()
        .map(|&(a, b)| {
            100.0 * argmax.iter().filter(|f| matches!(f, Some(f) if *f >= a && *f < b)).count() as f64 / n
        })
        .collect())
}

/// Slow reference estimator.
///
/// The time-varying autocorrelation `r[n; τ] = s[n]·s[n+τ]` is averaged over
/// frames aligned to the cycle period `P` samples, the cyclic autocorrelation
/// is its Fourier coefficient over one period, and the CSD is the Fourier
/// transform over lag with the lag window `Σ w[x]w[x+τ] / Σ w²` of a Hann
/// window of length `nfft`. For traces whose time-varying autocorrelation is
/// periodic in `P`, this matches [`csd_of`] up to estimator edge effects.
pub fn direct_csd(s: &[f64], fs: f64, period: usize, alpha: f64, nfft: usize) -> Result<Vec<Complex64>> {
    if period == 0 || s.len() < period + nfft {
        return Err(Error::Length("trace too short for the direct estimator".into()));
    }
    let w = hann(nfft);
    let energy: f64 = w.iter().map(|v| v * v).sum();
    let lag = |tau: isize| -> f64 {
        let t = tau.unsigned_abs();
        (0..nfft - t).map(|x| w[x] * w[x + t]).sum::<f64>() / energy
    };
    let n = s.len() as isize;
    let max_lag = nfft as isize - 1;
    let caf: Vec<Complex64> = (-max_lag..=max_lag)
        .map(|tau| {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..period as isize {
                let (mut sum, mut count) = (0.0, 0usize);
                let mut t = p;
                while t < n {
                    if t + tau >= 0 && t + tau < n {
                        sum += s[t as usize] * s[(t + tau) as usize];
                        count += 1;
                    }
                    t += period as isize;
                }
                if count > 0 {
                    let r = sum / count as f64;
                    acc += Complex64::from_polar(r, -2.0 * PI * alpha * p as f64 / fs);
                }
            }
            acc / period as f64
        })
        .collect();
    Ok((0..=nfft / 2)
        .map(|k| {
            let f = k as f64 * fs / nfft as f64 + alpha / 2.0;
            (-max_lag..=max_lag)
                .zip(&caf)
                .map(|(tau, &r)| r * lag(tau) * Complex64::from_polar(1.0, -2.0 * PI * f * tau as f64 / fs))
                .sum::<Complex64>()
                / fs
        })
        .collect())
}
