//! Frequency-shift (FRESH) style generator: white Gaussian excitation,
//! spectral shaping by two asymmetric double-sided exponential peaks, then
//! periodic temporal shaping by a symmetric double-sided exponential.

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::shaping::{shaped_noise, FftPair};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::trace::{NoiseTrace, TraceSet};

/// One asymmetric double-sided exponential spectral peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub f0_hz: f64,
    pub amplitude: f64,
    pub decay_left_hz: f64,
    pub decay_right_hz: f64,
}

impl SpectralPeak {
    /// Magnitude at `f_hz`: `amplitude * exp(-|f - f0| / decay)` with the
    /// left decay below `f0` and the right decay at or above it.
    pub fn eval(&self, f_hz: f64) -> f64 {
        let decay = if f_hz < self.f0_hz {
            self.decay_left_hz
        } else {
            self.decay_right_hz
        };
        self.amplitude * (-(f_hz - self.f0_hz).abs() / decay).exp()
    }

    fn validate(&self) -> Result<()> {
        let ok = self.f0_hz.is_finite()
            && self.amplitude.is_finite()
            && self.amplitude >= 0.0
            && self.decay_left_hz > 0.0
            && self.decay_right_hz > 0.0
            && self.decay_left_hz.is_finite()
            && self.decay_right_hz.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "spectral peak needs amplitude >= 0 and positive decays: {self:?}"
            )))
        }
    }
}

pub fn spectral_shape_eval(peak: &SpectralPeak, f_hz: f64) -> f64 {
    peak.eval(f_hz)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreshConfig {
    pub cycle_period_s: f64,
    pub spectral_peaks: [SpectralPeak; 2],
    /// Position of the temporal envelope maximum as a fraction of the cycle.
    pub temporal_center_frac: f64,
    pub temporal_decay_s: f64,
    pub sample_rate_hz: f64,
    /// Start each trace at a uniformly random cycle phase instead of phase 0.
    #[serde(default)]
    pub random_phase: bool,
}

impl FreshConfig {
    pub fn validate(&self) -> Result<()> {
        for p in &self.spectral_peaks {
            p.validate()?;
        }
        if !(self.cycle_period_s > 0.0 && self.cycle_period_s.is_finite()) {
            return Err(Error::InvalidConfig("cycle_period_s must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.temporal_center_frac) {
            return Err(Error::InvalidConfig(
                "temporal_center_frac must lie in [0, 1)".into(),
            ));
        }
        if !(self.temporal_decay_s > 0.0 && self.temporal_decay_s.is_finite()) {
            return Err(Error::InvalidConfig("temporal_decay_s must be positive".into()));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidConfig("sample_rate_hz must be positive".into()));
        }
        Ok(())
    }

    pub fn cycle_hz(&self) -> f64 {
        1.0 / self.cycle_period_s
    }

    /// Combined magnitude response of both peaks at `|f|`.
    pub fn spectral_gain(&self, f_hz: f64) -> f64 {
        let f = f_hz.abs();
        self.spectral_peaks.iter().map(|p| p.eval(f)).sum()
    }

    fn envelope(&self, t: f64) -> f64 {
        let tc = self.temporal_center_frac * self.cycle_period_s;
        (-(t - tc).abs() / self.temporal_decay_s).exp()
    }
}

/// Temporal gain at time `t` seconds into a cycle.
pub fn temporal_shape_eval(cfg: &FreshConfig, t: f64) -> Result<f64> {
    if !(0.0..cfg.cycle_period_s).contains(&t) {
        return Err(Error::OutOfRange(format!(
            "t = {t} s outside the cycle [0, {})",
            cfg.cycle_period_s
        )));
    }
    Ok(cfg.envelope(t))
}

fn fresh_trace(cfg: &FreshConfig, fft: &FftPair, mut rng: Rng) -> Result<Vec<f64>> {
    let fs = cfg.sample_rate_hz;
    let phase = if cfg.random_phase {
        rng.next_f64() * cfg.cycle_period_s
    } else {
        0.0
    };
    let (mut x, _) = shaped_noise(fft, &mut rng, fs, |f| cfg.spectral_gain(f))?;
    for (n, v) in x.iter_mut().enumerate() {
        let t = (n as f64 / fs + phase).rem_euclid(cfg.cycle_period_s);
        // rem_euclid can round up to exactly one period.
        let t = if t >= cfg.cycle_period_s { 0.0 } else { t };
        *v *= cfg.envelope(t);
    }
    Ok(x)
}

/// Generates `n_traces` FRESH traces of `trace_len` samples.
///
/// Trace `i` draws from `rng.substream(i)`, so the output does not depend
/// on how the work is scheduled.
pub fn gen_fresh(
    cfg: &FreshConfig,
    n_traces: usize,
    trace_len: usize,
    rng: &Rng,
) -> Result<TraceSet> {
    cfg.validate()?;
    if n_traces == 0 {
        return Err(Error::InvalidConfig("n_traces must be at least 1".into()));
    }
    if !trace_len.is_power_of_two() {
        return Err(Error::Length(format!(
            "trace_len {trace_len} must be a power of two"
        )));
    }
    let span = trace_len as f64 / cfg.sample_rate_hz;
    if span < 2.0 * cfg.cycle_period_s {
        return Err(Error::Length(format!(
            "trace of {trace_len} samples spans {span:.6} s, less than two cycles of {:.6} s",
            cfg.cycle_period_s
        )));
    }
    let fft = FftPair::new(&mut FftPlanner::new(), trace_len);
    let traces = (0..n_traces)
        .into_par_iter()
        .map(|i| {
            let x = fresh_trace(cfg, &fft, rng.substream(i as u64))?;
            NoiseTrace::from_f64(&x, cfg.sample_rate_hz)
        })
        .collect::<Result<Vec<_>>>()?;
    TraceSet::new("fresh", traces)
}
