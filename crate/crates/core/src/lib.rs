//! Cyclostationary powerline-noise toolkit: parametric synthesis (PSCGM and
//! FRESH), a 1-D convolutional Wasserstein GAN with hand-written gradients,
//! and a cyclic-spectral / feature-statistics evaluation suite.

pub mod cyclometrics;
pub mod error;
pub mod ndiff;
pub mod nggan;
pub mod rng;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use rng::Rng;
pub use trace::{NoiseTrace, TraceSet};
