//! Parametric cyclostationary noise generators.

mod fresh;
pub mod presets;
mod pscgm;
mod shaping;

use serde::{Deserialize, Serialize};

pub use fresh::{gen_fresh, spectral_shape_eval, temporal_shape_eval, FreshConfig, SpectralPeak};
pub use pscgm::{gen_pscgm, PscgmConfig, PsdTerm, RegionSpec};

use crate::error::Result;
use crate::rng::Rng;
use crate::trace::TraceSet;

/// A generator choice as it appears in a config file, tagged by `model`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SynthModel {
    Fresh(FreshConfig),
    Pscgm(PscgmConfig),
}

impl SynthModel {
    pub const NAMES: [&'static str; 2] = ["fresh", "pscgm"];

    pub fn sample_rate_hz(&self) -> f64 {
        match self {
            SynthModel::Fresh(c) => c.sample_rate_hz,
            SynthModel::Pscgm(c) => c.sample_rate_hz,
        }
    }

    pub fn cycle_hz(&self) -> f64 {
        match self {
            SynthModel::Fresh(c) => c.cycle_hz(),
            SynthModel::Pscgm(c) => c.cycle_hz(),
        }
    }

    pub fn generate(&self, n_traces: usize, trace_len: usize, rng: &Rng) -> Result<TraceSet> {
        match self {
            SynthModel::Fresh(c) => gen_fresh(c, n_traces, trace_len, rng),
            SynthModel::Pscgm(c) => gen_pscgm(c, n_traces, trace_len, rng),
        }
    }
}
