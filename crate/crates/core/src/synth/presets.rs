//! Built-in generator settings.
//!
//! The PSCGM preset is representative of a low-voltage site with one
//! background region and two impulsive regions. It is NOT the LV14 table of
//! IEEE 1901.2 Annex D, whose values are not reproduced here; load a config
//! file to use other parameters.

use super::{FreshConfig, PscgmConfig, PsdTerm, RegionSpec, SpectralPeak};

/// Cyclostationary fundamental used by the presets, Hz.
pub const CYCLE_HZ: f64 = 122.0;
/// Full-scale sample rate: 2.5 µs sampling period.
pub const FULL_RATE_HZ: f64 = 400_000.0;
pub const FULL_TRACE_LEN: usize = 16_384;
/// Desk-scale traces keep ~5 cycles in 1024 samples by sampling 16x slower.
pub const DESK_RATE_HZ: f64 = 25_000.0;
pub const DESK_TRACE_LEN: usize = 1024;

/// Dataset-1-like PSCGM: representative, not LV14.
pub fn dataset1_like() -> PscgmConfig {
    let cycle = 1.0 / CYCLE_HZ;
    let impulse_a = 0.9e-3;
    let impulse_b = 0.6e-3;
    PscgmConfig {
        cycle_period_s: cycle,
        regions: vec![
            RegionSpec {
                duration_s: cycle - impulse_a - impulse_b,
                psd_shape: vec![PsdTerm {
                    center_hz: 0.0,
                    gain: 1.0,
                    decay_hz: 40e3,
                }],
                rms_volts: 0.02,
            },
            RegionSpec {
                duration_s: impulse_a,
                psd_shape: vec![
                    PsdTerm {
                        center_hz: 25e3,
                        gain: 1.0,
                        decay_hz: 10e3,
                    },
                    PsdTerm {
                        center_hz: 170e3,
                        gain: 0.6,
                        decay_hz: 15e3,
                    },
                ],
                rms_volts: 0.15,
            },
            RegionSpec {
                duration_s: impulse_b,
                psd_shape: vec![PsdTerm {
                    center_hz: 120e3,
                    gain: 1.0,
                    decay_hz: 25e3,
                }],
                rms_volts: 0.06,
            },
        ],
        sample_rate_hz: FULL_RATE_HZ,
        random_phase: false,
    }
}

/// Dataset-2-like FRESH generator at 400 kHz, 122 Hz cycle.
pub fn dataset2_like() -> FreshConfig {
    FreshConfig {
        cycle_period_s: 1.0 / CYCLE_HZ,
        spectral_peaks: [
            SpectralPeak {
                f0_hz: 30e3,
                amplitude: 1.0,
                decay_left_hz: 6e3,
                decay_right_hz: 12e3,
            },
            SpectralPeak {
                f0_hz: 85e3,
                amplitude: 0.4,
                decay_left_hz: 8e3,
                decay_right_hz: 5e3,
            },
        ],
        temporal_center_frac: 0.3,
        temporal_decay_s: 0.4e-3,
        sample_rate_hz: FULL_RATE_HZ,
        random_phase: false,
    }
}

/// Desk-scale FRESH generator: same cycle, 25 kHz sampling, peaks scaled
/// into the 12.5 kHz band.
pub fn dataset2_desk() -> FreshConfig {
    FreshConfig {
        cycle_period_s: 1.0 / CYCLE_HZ,
        spectral_peaks: [
            SpectralPeak {
                f0_hz: 2.5e3,
                amplitude: 1.0,
                decay_left_hz: 0.5e3,
                decay_right_hz: 1.0e3,
            },
            SpectralPeak {
                f0_hz: 7.5e3,
                amplitude: 0.4,
                decay_left_hz: 0.6e3,
                decay_right_hz: 0.4e3,
            },
        ],
        temporal_center_frac: 0.3,
        temporal_decay_s: 0.6e-3,
        sample_rate_hz: DESK_RATE_HZ,
        random_phase: false,
    }
}
