use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndiff::UpsampleMode;

/// Upsampling factor per generator block and stride per critic block.
pub const SCALE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NgganConfig {
    pub latent_dim: usize,
    pub base_len: usize,
    pub base_ch: usize,
    pub blocks: usize,
    pub kernel_len: usize,
    pub leaky_slope: f64,
    pub upsample_mode: UpsampleMode,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub batch: usize,
    pub critic_steps_per_gen: usize,
    pub clip_value: f64,
    /// L2 coefficient added to the gradients of both networks.
    pub l2: f64,
    /// Dropout after each critic activation.
    pub dropout: f64,
    /// Evaluations without FID improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    /// FID is evaluated every this many epochs.
    pub eval_every: usize,
    /// Share of the data held out for FID.
    pub holdout_frac: f64,
}

impl Default for NgganConfig {
    fn default() -> Self {
        Self {
            latent_dim: 100,
            base_len: 16,
            base_ch: 1024,
            blocks: 5,
            kernel_len: 25,
            leaky_slope: 0.2,
            upsample_mode: UpsampleMode::Hybrid,
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            epochs: 200,
            batch: 64,
            critic_steps_per_gen: 5,
            clip_value: 0.01,
            l2: 0.0,
            dropout: 0.3,
            early_stop_patience: 20,
            eval_every: 1,
            holdout_frac: 0.1,
        }
    }
}

impl NgganConfig {
    /// Three blocks (1024-sample traces) with narrow layers, sized for CPU
    /// training in minutes.
    pub fn desk() -> Self {
        Self {
            blocks: 3,
            base_ch: 32,
            epochs: 50,
            ..Self::default()
        }
    }

    pub fn trace_len(&self) -> usize {
        self.base_len * SCALE.pow(self.blocks as u32)
    }

    /// Output channels of generator block `i`.
    pub fn gen_channels(&self, i: usize) -> usize {
        if i + 1 == self.blocks {
            1
        } else {
            self.base_ch >> (i + 1)
        }
    }

    /// Output channels of critic block `i`.
    pub fn critic_channels(&self, i: usize) -> usize {
        self.base_ch >> (self.blocks - 1 - i)
    }

    /// Left/right padding of the stride-4 critic convolutions, chosen so each
    /// block shortens the signal by exactly 4.
    pub fn critic_padding(&self) -> (usize, usize) {
        let total = self.kernel_len - SCALE;
        (total / 2, total - total / 2)
    }

    pub fn gen_padding(&self) -> (usize, usize) {
        let half = (self.kernel_len - 1) / 2;
        (half, half)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1".into());
        }
        if self.batch < 2 {
            return bad(format!("batch must be >= 2, got {}", self.batch));
        }
        if self.blocks == 0 || self.blocks > 8 || self.base_len == 0 {
            return bad(format!("need 1..=8 blocks and base_len >= 1, got {} / {}", self.blocks, self.base_len));
        }
        let step = 1usize << (self.blocks - 1);
        if self.base_ch < step || self.base_ch % step != 0 {
            return bad(format!(
                "base_ch {} must be a positive multiple of 2^(blocks-1) = {step}",
                self.base_ch
            ));
        }
        if self.kernel_len < SCALE + 1 || self.kernel_len % 2 == 0 {
            return bad(format!("kernel_len must be odd and >= 5, got {}", self.kernel_len));
        }
        if !(self.lr > 0.0) || !(self.clip_value > 0.0) || self.l2 < 0.0 {
            return bad("lr and clip_value must be > 0, l2 >= 0".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("optimizer betas must be in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.dropout) || !(self.leaky_slope >= 0.0) {
            return bad("dropout must be in [0, 1) and leaky_slope >= 0".into());
        }
        if self.critic_steps_per_gen == 0 || self.eval_every == 0 {
            return bad("critic_steps_per_gen and eval_every must be >= 1".into());
        }
        if !(self.holdout_frac > 0.0 && self.holdout_frac < 1.0) {
            return bad(format!("holdout_frac must be in (0, 1), got {}", self.holdout_frac));
        }
        Ok(())
    }
}
