use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::trace::NoiseTrace;

/// Hann-windowed short-time magnitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// Frame start times in seconds.
    pub times: Vec<f64>,
    /// One-sided bin frequencies, `0..=win_len/2`.
    pub freqs: Vec<f64>,
    /// `times × freqs` magnitudes.
    pub magnitude: Vec<Vec<f64>>,
    pub win_len: usize,
}

pub fn spectrogram(trace: &NoiseTrace, win_len: usize, hop: usize) -> Result<Spectrogram> {
    let fs = trace.sample_rate_hz();
    let s = trace.to_f64();
    if win_len < 2 || win_len > s.len() || hop == 0 {
        return Err(Error::Length(format!(
            "spectrogram window {win_len} / hop {hop} invalid for a trace of {} samples",
            s.len()
        )));
    }
    let w: Vec<f64> = (0..win_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / win_len as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(win_len);
    let frames = (s.len() - win_len) / hop + 1;
    let half = win_len / 2 + 1;
    let mut buf = vec![Complex64::new(0.0, 0.0); win_len];
    let mut magnitude = Vec::with_capacity(frames);
    for f in 0..frames {
        let start = f * hop;
        for i in 0..win_len {
            buf[i] = Complex64::new(s[start + i] * w[i], 0.0);
        }
        fft.process(&mut buf);
        magnitude.push(buf[..half].iter().map(|c| c.norm()).collect());
    }
    Ok(Spectrogram {
        times: (0..frames).map(|f| (f * hop) as f64 / fs).collect(),
        freqs: (0..half).map(|k| k as f64 * fs / win_len as f64).collect(),
        magnitude,
        win_len,
    })
}
