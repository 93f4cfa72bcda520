//! Generator and critic networks with explicit forward caches and backward
//! passes.
//!
//! Generator: dense(latent → base_len·base_ch), reshape, BN, ReLU, then per
//! block upsample ×4 → conv k25 s1, followed by BN + ReLU on all but the
//! last block and tanh on the last.
//!
//! Critic: per block conv k25 s4 → leaky ReLU → dropout, then flatten and
//! dense → 1 with no output nonlinearity.

use crate::error::{shape_err, Result};
use crate::ndiff::{
    upsample, upsample_backward, Activation, BatchNormCache, BatchNormLayer, Conv1dLayer,
    DenseLayer, Dropout, Module, OptimizerState, Param, Scalar, Tensor3, UpsampleMode,
};
use crate::nggan::config::{NgganConfig, SCALE};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    pub dense: DenseLayer<T>,
    /// `norms[0]` follows the dense layer, `norms[i + 1]` follows block `i`.
    pub norms: Vec<BatchNormLayer<T>>,
    pub convs: Vec<Conv1dLayer<T>>,
    pub base_len: usize,
    pub base_ch: usize,
    pub mode: UpsampleMode,
}

/// Intermediate values of a training-mode generator pass.
#[derive(Debug, Clone)]
pub struct GenCache<T> {
    z: Tensor3<T>,
    norm: Vec<BatchNormCache<T>>,
    /// Pre-ReLU activations, one per norm layer.
    pre_relu: Vec<Tensor3<T>>,
    /// Upsampled inputs of each convolution.
    conv_in: Vec<Tensor3<T>>,
    /// Pre-tanh output of the last convolution.
    pre_tanh: Tensor3<T>,
}

impl<T> GenCache<T> {
    /// Tensors whose sign pattern determines the ReLU branch taken.
    pub fn kinks(&self) -> &[Tensor3<T>] {
        &self.pre_relu
    }
}

impl<T: Scalar> Generator<T> {
    pub fn new(cfg: &NgganConfig, rng: &mut Rng) -> Result<Self> {
        let dense = DenseLayer::new("g.dense", cfg.latent_dim, cfg.base_len * cfg.base_ch, rng);
        let mut norms = vec![BatchNormLayer::new("g.bn0", cfg.base_ch)];
        let mut convs = Vec::with_capacity(cfg.blocks);
        let mut ch = cfg.base_ch;
        for i in 0..cfg.blocks {
            let out = cfg.gen_channels(i);
            convs.push(Conv1dLayer::new(
                &format!("g.conv{i}"),
                cfg.kernel_len,
                ch,
                out,
                1,
                cfg.gen_padding(),
                rng,
            )?);
            if i + 1 < cfg.blocks {
                norms.push(BatchNormLayer::new(&format!("g.bn{}", i + 1), out));
            }
            ch = out;
        }
        Ok(Self {
            dense,
            norms,
            convs,
            base_len: cfg.base_len,
            base_ch: cfg.base_ch,
            mode: cfg.upsample_mode,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.dense.in_dim
    }

    pub fn output_len(&self) -> usize {
        self.base_len * SCALE.pow(self.convs.len() as u32)
    }

    fn check_z(&self, z: &Tensor3<T>) -> Result<()> {
        if z.len() * z.channels() != self.latent_dim() {
            return shape_err(format!(
                "latent input has {} values per item, generator expects {}",
                z.len() * z.channels(),
                self.latent_dim()
            ));
        }
        Ok(())
    }

    /// Inference pass with running normalization statistics.
    pub fn forward_eval(&self, z: &Tensor3<T>) -> Result<Tensor3<T>> {
        self.check_z(z)?;
        let h = self.dense.forward(z)?.reshape(self.base_len, self.base_ch)?;
        let mut a = Activation::Relu.forward(&self.norms[0].forward_eval(&h)?);
        let last = self.convs.len() - 1;
        for (i, conv) in self.convs.iter().enumerate() {
            let c = conv.forward(&upsample(&a, SCALE, self.mode)?)?;
            if i == last {
                return Ok(Activation::Tanh.forward(&c));
            }
            a = Activation::Relu.forward(&self.norms[i + 1].forward_eval(&c)?);
        }
        unreachable!("generator has at least one block")
    }

    /// Training pass with batch statistics; the caller decides whether the
    /// running statistics absorb this batch.
    pub fn forward_train(&self, z: &Tensor3<T>) -> Result<(Tensor3<T>, GenCache<T>)> {
        self.check_z(z)?;
        let h = self.dense.forward(z)?.reshape(self.base_len, self.base_ch)?;
        let (y, c0) = self.norms[0].forward_train(&h)?;
        let mut a = Activation::Relu.forward(&y);
        let mut norm = vec![c0];
        let mut pre_relu = vec![y];
        let mut conv_in = Vec::with_capacity(self.convs.len());
        let last = self.convs.len() - 1;
        for (i, conv) in self.convs.iter().enumerate() {
            let u = upsample(&a, SCALE, self.mode)?;
            let c = conv.forward(&u)?;
            conv_in.push(u);
            if i == last {
                let out = Activation::Tanh.forward(&c);
                let cache = GenCache {
                    z: z.clone(),
                    norm,
                    pre_relu,
                    conv_in,
                    pre_tanh: c,
                };
                return Ok((out, cache));
            }
            let (y, ci) = self.norms[i + 1].forward_train(&c)?;
            a = Activation::Relu.forward(&y);
            norm.push(ci);
            pre_relu.push(y);
        }
        unreachable!("generator has at least one block")
    }

    pub fn update_running(&mut self, cache: &GenCache<T>) {
        for (bn, c) in self.norms.iter_mut().zip(&cache.norm) {
            bn.update_running(c);
        }
    }

    /// Accumulates parameter gradients and returns the latent gradient.
    pub fn backward(&mut self, cache: &GenCache<T>, grad_out: &Tensor3<T>) -> Result<Tensor3<T>> {
        let mut g = Activation::Tanh.backward(&cache.pre_tanh, grad_out)?;
        for i in (0..self.convs.len()).rev() {
            let gu = self.convs[i].backward_accumulate(&cache.conv_in[i], &g)?;
            let ga = upsample_backward(&gu, SCALE, self.mode)?;
            let gy = Activation::Relu.backward(&cache.pre_relu[i], &ga)?;
            g = self.norms[i].backward_accumulate(&cache.norm[i], &gy)?;
        }
        let g = g.reshape(1, self.base_len * self.base_ch)?;
        self.dense.backward_accumulate(&cache.z, &g)
    }
}

impl<T: Scalar> Module<T> for Generator<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = self.dense.params();
        for bn in &self.norms {
            v.extend(bn.params());
        }
        for c in &self.convs {
            v.extend(c.params());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = self.dense.params_mut();
        for bn in &mut self.norms {
            v.extend(bn.params_mut());
        }
        for c in &mut self.convs {
            v.extend(c.params_mut());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critic<T> {
    pub convs: Vec<Conv1dLayer<T>>,
    pub dense: DenseLayer<T>,
    pub slope: f64,
    pub dropout: Dropout,
    pub input_len: usize,
}

#[derive(Debug, Clone)]
pub struct CriticCache<T> {
    conv_in: Vec<Tensor3<T>>,
    pre_act: Vec<Tensor3<T>>,
    masks: Vec<Option<Vec<T>>>,
    flat: Tensor3<T>,
}

impl<T> CriticCache<T> {
    pub fn kinks(&self) -> &[Tensor3<T>] {
        &self.pre_act
    }
}

impl<T: Scalar> Critic<T> {
    pub fn new(cfg: &NgganConfig, rng: &mut Rng) -> Result<Self> {
        let mut convs = Vec::with_capacity(cfg.blocks);
        let mut ch = 1;
        for i in 0..cfg.blocks {
            let out = cfg.critic_channels(i);
            convs.push(Conv1dLayer::new(
                &format!("d.conv{i}"),
                cfg.kernel_len,
                ch,
                out,
                SCALE,
                cfg.critic_padding(),
                rng,
            )?);
            ch = out;
        }
        Ok(Self {
            convs,
            dense: DenseLayer::new("d.dense", cfg.base_len * ch, 1, rng),
            slope: cfg.leaky_slope,
            dropout: Dropout { rate: cfg.dropout },
            input_len: cfg.trace_len(),
        })
    }

    fn act(&self) -> Activation {
        Activation::LeakyRelu(self.slope)
    }

    fn check_x(&self, x: &Tensor3<T>) -> Result<()> {
        if x.len() != self.input_len || x.channels() != 1 {
            return shape_err(format!(
                "critic expects inputs of length {} with 1 channel, got length {} with {}",
                self.input_len,
                x.len(),
                x.channels()
            ));
        }
        Ok(())
    }

    /// One score per batch item, shape `(batch, 1, 1)`; dropout disabled.
    pub fn forward_eval(&self, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        self.check_x(x)?;
        let mut h = x.clone();
        for conv in &self.convs {
            h = self.act().forward(&conv.forward(&h)?);
        }
        let (_, l, c) = h.shape();
        self.dense.forward(&h.reshape(1, l * c)?)
    }

    /// Training pass; dropout masks are drawn from `rng` when given.
    pub fn forward_train(&self, x: &Tensor3<T>, rng: Option<&mut Rng>) -> Result<(Tensor3<T>, CriticCache<T>)> {
        self.check_x(x)?;
        let mut rng = rng;
        let mut h = x.clone();
        let n = self.convs.len();
        let (mut conv_in, mut pre_act, mut masks) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for conv in &self.convs {
            let c = conv.forward(&h)?;
            let a = self.act().forward(&c);
            conv_in.push(std::mem::replace(&mut h, a));
            pre_act.push(c);
            match rng.as_deref_mut() {
                Some(r) if self.dropout.rate > 0.0 => {
                    let (d, mask) = self.dropout.forward_train(&h, r);
                    h = d;
                    masks.push(Some(mask));
                }
                _ => masks.push(None),
            }
        }
        let (_, l, c) = h.shape();
        let flat = h.reshape(1, l * c)?;
        let out = self.dense.forward(&flat)?;
        Ok((
            out,
            CriticCache {
                conv_in,
                pre_act,
                masks,
                flat,
            },
        ))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &CriticCache<T>, grad_out: &Tensor3<T>) -> Result<Tensor3<T>> {
        let g = self.dense.backward_accumulate(&cache.flat, grad_out)?;
        let last = cache.pre_act.last().expect("critic has at least one block");
        let mut g = g.reshape(last.len(), last.channels())?;
        for i in (0..self.convs.len()).rev() {
            if let Some(mask) = &cache.masks[i] {
                g = Dropout::backward(mask, &g);
            }
            g = self.act().backward(&cache.pre_act[i], &g)?;
            g = self.convs[i].backward_accumulate(&cache.conv_in[i], &g)?;
        }
        Ok(g)
    }
}

impl<T: Scalar> Module<T> for Critic<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = Vec::new();
        for c in &self.convs {
            v.extend(c.params());
        }
        v.extend(self.dense.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = Vec::new();
        for c in &mut self.convs {
            v.extend(c.params_mut());
        }
        v.extend(self.dense.params_mut());
        v
    }
}

/// Both networks, their optimizer state and the training position.
#[derive(Debug, Clone, PartialEq)]
pub struct NgganModel<T> {
    pub config: NgganConfig,
    pub generator: Generator<T>,
    pub critic: Critic<T>,
    pub opt_g: OptimizerState<T>,
    pub opt_d: OptimizerState<T>,
    /// Epochs completed so far.
    pub epoch: usize,
    /// Critic updates completed so far (drives the generator schedule).
    pub critic_steps: u64,
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub best_fid: Option<f64>,
    /// Evaluations since the best FID was last improved.
    pub stale_evals: usize,
}

pub fn build_model<T: Scalar>(cfg: &NgganConfig, sample_rate_hz: f64, rng: &Rng) -> Result<NgganModel<T>> {
    cfg.validate()?;
    let mut init = rng.substream(0x1417);
    let generator = Generator::new(cfg, &mut init)?;
    let critic = Critic::new(cfg, &mut init)?;
    let opt_g = OptimizerState::new(cfg.lr, cfg.beta1, cfg.beta2)?.with_weight_decay(cfg.l2);
    let opt_d = OptimizerState::new(cfg.lr, cfg.beta1, cfg.beta2)?
        .with_weight_decay(cfg.l2)
        .with_clip(Some(cfg.clip_value));
    let mut model = NgganModel {
        config: cfg.clone(),
        generator,
        critic,
        opt_g,
        opt_d,
        epoch: 0,
        critic_steps: 0,
        seed: rng.seed(),
        sample_rate_hz,
        best_fid: None,
        stale_evals: 0,
    };
    model.clip_critic();
    Ok(model)
}

impl<T: Scalar> NgganModel<T> {
    /// Enforces `|w| ≤ clip_value` on every critic parameter.
    pub fn clip_critic(&mut self) {
        let c = T::lit(self.config.clip_value);
        for p in self.critic.params_mut() {
            for v in &mut p.value {
                *v = v.max(-c).min(c);
            }
        }
    }

    pub fn max_abs_critic_weight(&self) -> f64 {
        self.critic
            .params()
            .iter()
            .flat_map(|p| p.value.iter())
            .map(|v| v.to_f64_lossy().abs())
            .fold(0.0, f64::max)
    }

    pub fn param_count(&self) -> (usize, usize) {
        (self.generator.param_count(), self.critic.param_count())
    }
}

/// `mean(d_fake) − mean(d_real)`.
pub fn critic_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    if d_real.len() != d_fake.len() || d_real.is_empty() {
        return shape_err(format!(
            "critic loss needs equal nonempty batches, got {} real and {} fake",
            d_real.len(),
            d_fake.len()
        ));
    }
    let n = d_real.len() as f64;
    Ok(d_fake.iter().sum::<f64>() / n - d_real.iter().sum::<f64>() / n)
}

/// `−mean(d_fake)`.
pub fn generator_loss(d_fake: &[f64]) -> f64 {
    -d_fake.iter().sum::<f64>() / d_fake.len() as f64
}

/// Uniform latent batch in `[−1, 1)`.
pub fn latent_batch<T: Scalar>(rng: &mut Rng, batch: usize, dim: usize) -> Tensor3<T> {
    let v = (0..batch * dim).map(|_| T::lit(2.0 * rng.next_f64() - 1.0)).collect();
    Tensor3::from_vec(v, batch, 1, dim).expect("finite latent draws")
}
