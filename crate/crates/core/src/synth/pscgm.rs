//! Piecewise spectral cyclostationary Gaussian model.
//!
//! Each cycle is split into 2–3 regions. Every region instance (one region
//! in one cycle) gets its own excitation, is spectrally shaped by the
//! region's sum-of-exponentials magnitude, scaled to the region RMS and
//! written into the trace. Adjacent instances overlap by 10% of the shorter
//! region with a power-complementary raised-cosine crossfade
//! (`sin(πx/2)` in, `cos(πx/2)` out), so the variance is continuous across
//! the join while the two noises stay uncorrelated.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::shaping::{shaped_noise, FftPair};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::trace::{NoiseTrace, TraceSet};

const CROSSFADE_FRAC: f64 = 0.1;

/// One `(center, gain, decay)` term of a region's spectral magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdTerm {
    pub center_hz: f64,
    pub gain: f64,
    pub decay_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub duration_s: f64,
    pub psd_shape: Vec<PsdTerm>,
    pub rms_volts: f64,
}

impl RegionSpec {
    /// Spectral magnitude at `|f|`.
    pub fn magnitude(&self, f_hz: f64) -> f64 {
        let f = f_hz.abs();
        self.psd_shape
            .iter()
            .map(|t| t.gain * (-(f - t.center_hz).abs() / t.decay_hz).exp())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PscgmConfig {
    pub cycle_period_s: f64,
    pub regions: Vec<RegionSpec>,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub random_phase: bool,
}

impl PscgmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad("sample_rate_hz must be positive".into());
        }
        if !(self.cycle_period_s > 0.0 && self.cycle_period_s.is_finite()) {
            return bad("cycle_period_s must be positive".into());
        }
        if !(2..=3).contains(&self.regions.len()) {
            return bad(format!(
                "a cycle has 2 or 3 regions, got {}",
                self.regions.len()
            ));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if !(r.duration_s > 0.0 && r.duration_s.is_finite()) {
                return bad(format!("region {i}: duration_s must be positive"));
            }
            if !(r.rms_volts >= 0.0 && r.rms_volts.is_finite()) {
                return bad(format!("region {i}: rms_volts must be >= 0"));
            }
            for t in &r.psd_shape {
                if !(t.gain >= 0.0 && t.gain.is_finite()) {
                    return bad(format!("region {i}: psd gains must be finite and >= 0"));
                }
                if !(t.decay_hz > 0.0) || !t.center_hz.is_finite() {
                    return bad(format!("region {i}: psd decay_hz must be > 0"));
                }
            }
        }
        let total: f64 = self.regions.iter().map(|r| r.duration_s).sum();
        if (total - self.cycle_period_s).abs() > 1.0 / self.sample_rate_hz {
            return bad(format!(
                "region durations sum to {total} s, cycle is {} s",
                self.cycle_period_s
            ));
        }
        Ok(())
    }

    pub fn cycle_hz(&self) -> f64 {
        1.0 / self.cycle_period_s
    }
}

/// One region in one cycle, in fractional sample coordinates.
struct Instance {
    region: usize,
    start: f64,
    end: f64,
    fade_in: f64,
    fade_out: f64,
}

fn instances(cfg: &PscgmConfig, trace_len: usize, phase_s: f64) -> Vec<Instance> {
    let fs = cfg.sample_rate_hz;
    let nreg = cfg.regions.len();
    let width = |a: usize, b: usize| {
        CROSSFADE_FRAC * cfg.regions[a].duration_s.min(cfg.regions[b].duration_s) * fs
    };
    let offsets: Vec<f64> = cfg
        .regions
        .iter()
        .scan(0.0, |acc, r| {
            let o = *acc;
            *acc += r.duration_s;
            Some(o)
        })
        .collect();
    let cycle = cfg.cycle_period_s * fs;
    let mut out = Vec::new();
    // Start one cycle early so the crossfade into sample 0 is present.
    let mut cycle_start = -phase_s * fs - cycle;
    while cycle_start < trace_len as f64 + cycle {
        for r in 0..nreg {
            let start = cycle_start + offsets[r] * fs;
            let end = start + cfg.regions[r].duration_s * fs;
            let fade_in = width((r + nreg - 1) % nreg, r);
            let fade_out = width(r, (r + 1) % nreg);
            if end + fade_out / 2.0 > 0.0 && start - fade_in / 2.0 < trace_len as f64 {
                out.push(Instance {
                    region: r,
                    start,
                    end,
                    fade_in,
                    fade_out,
                });
            }
        }
        cycle_start += cycle;
    }
    out
}

impl Instance {
    /// Support as integer sample indices `[first, last)`.
    fn support(&self) -> (i64, i64) {
        let lo = (self.start - self.fade_in / 2.0).ceil() as i64;
        let hi = (self.end + self.fade_out / 2.0).ceil() as i64;
        (lo, hi)
    }

    fn weight(&self, n: f64) -> f64 {
        let rise = self.start - self.fade_in / 2.0;
        let fall = self.end - self.fade_out / 2.0;
        if self.fade_in > 0.0 && n < self.start + self.fade_in / 2.0 {
            let x = ((n - rise) / self.fade_in).clamp(0.0, 1.0);
            (FRAC_PI_2 * x).sin()
        } else if self.fade_out > 0.0 && n >= fall {
            let x = ((n - fall) / self.fade_out).clamp(0.0, 1.0);
            (FRAC_PI_2 * x).cos()
        } else {
            1.0
        }
    }
}

fn pscgm_trace(cfg: &PscgmConfig, trace_len: usize, mut rng: Rng) -> Result<Vec<f64>> {
    let phase = if cfg.random_phase {
        rng.next_f64() * cfg.cycle_period_s
    } else {
        0.0
    };
    let mut planner = FftPlanner::new();
    let mut plans: HashMap<usize, FftPair> = HashMap::new();
    let mut out = vec![0.0; trace_len];
    for inst in instances(cfg, trace_len, phase) {
        let (lo, hi) = inst.support();
        let len = (hi - lo).max(1) as usize;
        let region = &cfg.regions[inst.region];
        let fft = plans
            .entry(len)
            .or_insert_with(|| FftPair::new(&mut planner, len));
        let (seg, power) = shaped_noise(fft, &mut rng, cfg.sample_rate_hz, |f| region.magnitude(f))?;
        if power == 0.0 {
            continue;
        }
        let scale = region.rms_volts / power.sqrt();
        for (i, v) in seg.iter().enumerate() {
            let n = lo + i as i64;
            if n < 0 || n >= trace_len as i64 {
                continue;
            }
            out[n as usize] += scale * inst.weight(n as f64) * v;
        }
    }
    Ok(out)
}

/// Generates `n_traces` PSCGM traces; trace `i` uses `rng.substream(i)`.
pub fn gen_pscgm(
    cfg: &PscgmConfig,
    n_traces: usize,
    trace_len: usize,
    rng: &Rng,
) -> Result<TraceSet> {
    cfg.validate()?;
    if n_traces == 0 {
        return Err(Error::InvalidConfig("n_traces must be at least 1".into()));
    }
    if (trace_len as f64) < cfg.cycle_period_s * cfg.sample_rate_hz {
        return Err(Error::Length(format!(
            "trace_len {trace_len} is shorter than one cycle ({:.1} samples)",
            cfg.cycle_period_s * cfg.sample_rate_hz
        )));
    }
    let traces = (0..n_traces)
        .into_par_iter()
        .map(|i| {
            let x = pscgm_trace(cfg, trace_len, rng.substream(i as u64))?;
            NoiseTrace::from_f64(&x, cfg.sample_rate_hz)
        })
        .collect::<Result<Vec<_>>>()?;
    TraceSet::new("pscgm", traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::presets;

    fn flat(rms: f64, duration_s: f64) -> RegionSpec {
        RegionSpec {
            duration_s,
            psd_shape: vec![PsdTerm {
                center_hz: 0.0,
                gain: 1.0,
                decay_hz: 1e15,
            }],
            rms_volts: rms,
        }
    }

    #[test]
    fn crossfade_weights_are_power_complementary() {
        let cfg = PscgmConfig {
            cycle_period_s: 1.0,
            regions: vec![flat(1.0, 0.3), flat(1.0, 0.7)],
            sample_rate_hz: 1000.0,
            random_phase: false,
        };
        let insts = instances(&cfg, 3000, 0.0);
        for n in 0..3000 {
            let p: f64 = insts
                .iter()
                .filter(|i| {
                    let (lo, hi) = i.support();
                    (lo..hi).contains(&n)
                })
                .map(|i| i.weight(n as f64).powi(2))
                .sum();
            assert!((p - 1.0).abs() < 1e-12, "n={n} power {p}");
        }
    }

    #[test]
    fn flat_regions_give_unit_rms_per_cycle() {
        // Two identical flat regions of 4096 samples behave as one stationary
        // white process.
        let fs = 8192.0;
        let cfg = PscgmConfig {
            cycle_period_s: 1.0,
            regions: vec![flat(1.0, 0.5), flat(1.0, 0.5)],
            sample_rate_hz: fs,
            random_phase: false,
        };
        let set = gen_pscgm(&cfg, 4, 4 * 8192, &Rng::new(3)).unwrap();
        for t in set.traces() {
            for cyc in t.samples().chunks(8192) {
                let rms = (cyc.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / 8192.0).sqrt();
                assert!((rms - 1.0).abs() < 0.05, "rms {rms}");
            }
        }
    }

    #[test]
    fn two_level_rms_ratio_and_periodicity() {
        let fs = 100_000.0;
        let cfg = PscgmConfig {
            cycle_period_s: 0.01,
            regions: vec![flat(0.01, 0.006), flat(0.2, 0.004)],
            sample_rate_hz: fs,
            random_phase: false,
        };
        let per = 1000;
        let set = gen_pscgm(&cfg, 1, 100 * per, &Rng::new(4)).unwrap();
        let x = set.traces()[0].samples();
        // Region cores, away from the crossfades.
        let core = |a: usize, b: usize| {
            let mut acc = 0.0;
            let mut n = 0;
            for c in 0..100 {
                for i in a..b {
                    acc += (x[c * per + i] as f64).powi(2);
                    n += 1;
                }
            }
            (acc / n as f64).sqrt()
        };
        let quiet = core(100, 500);
        let loud = core(700, 900);
        let ratio = loud / quiet;
        assert!((ratio / 20.0 - 1.0).abs() < 0.1, "ratio {ratio}");

        // windowed RMS trajectory repeats cycle to cycle
        let win = 50;
        let traj = |c: usize| -> Vec<f64> {
            (0..per / win)
                .map(|w| {
                    let s = &x[c * per + w * win..c * per + (w + 1) * win];
                    s.iter().map(|&v| (v as f64).powi(2)).sum::<f64>()
                })
                .collect()
        };
        let mut avg_a = vec![0.0; per / win];
        let mut avg_b = vec![0.0; per / win];
        for c in 0..50 {
            for (a, v) in avg_a.iter_mut().zip(traj(c)) {
                *a += v;
            }
            for (b, v) in avg_b.iter_mut().zip(traj(c + 50)) {
                *b += v;
            }
        }
        for (a, b) in avg_a.iter().zip(&avg_b) {
            assert!((a / b - 1.0).abs() < 0.5, "{a} vs {b}");
        }
    }

    #[test]
    fn durations_must_sum_to_cycle() {
        let mut cfg = presets::dataset1_like();
        cfg.regions[0].duration_s *= 1.5;
        assert!(matches!(
            gen_pscgm(&cfg, 1, 16384, &Rng::new(1)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn region_count_and_length_limits() {
        let mut cfg = presets::dataset1_like();
        let mut one = cfg.clone();
        one.regions.truncate(1);
        one.regions[0].duration_s = one.cycle_period_s;
        assert!(gen_pscgm(&one, 1, 16384, &Rng::new(1)).is_err());
        assert!(matches!(gen_pscgm(&cfg, 1, 100, &Rng::new(1)), Err(Error::Length(_))));
        cfg.regions[1].rms_volts = -1.0;
        assert!(gen_pscgm(&cfg, 1, 16384, &Rng::new(1)).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = presets::dataset1_like();
        let a = gen_pscgm(&cfg, 3, 8192, &Rng::new(12)).unwrap();
        let b = gen_pscgm(&cfg, 3, 8192, &Rng::new(12)).unwrap();
        assert_eq!(a, b);
        let c = gen_pscgm(&cfg, 3, 8192, &Rng::new(13)).unwrap();
        assert_ne!(a, c);
    }
}
