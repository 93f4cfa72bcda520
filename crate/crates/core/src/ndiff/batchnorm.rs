use crate::error::{shape_err, Error, Result};
use crate::ndiff::param::{Module, Param};
use crate::ndiff::{Scalar, Tensor3};

/// Per-channel batch normalization over the batch and length axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer<T> {
    pub channels: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: f64,
    pub momentum: f64,
}

/// Batch statistics kept from a training-mode forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormCache<T> {
    pub x_hat: Tensor3<T>,
    pub mean: Vec<T>,
    /// Biased batch variance.
    pub var: Vec<T>,
    pub inv_std: Vec<T>,
}

impl<T: Scalar> BatchNormLayer<T> {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::filled(format!("{name}.gamma"), &[channels], T::one()),
            beta: Param::zeros(format!("{name}.beta"), &[channels]),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    fn check(&self, x: &Tensor3<T>) -> Result<()> {
        if x.channels() != self.channels {
            return shape_err(format!(
                "batch norm expects {} channels, got {}",
                self.channels,
                x.channels()
            ));
        }
        Ok(())
    }

    fn affine(&self, x: &Tensor3<T>, mean: &[T], inv_std: &[T]) -> (Tensor3<T>, Tensor3<T>) {
        let mut x_hat = x.clone();
        for row in x_hat.data_mut().chunks_mut(self.channels) {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[c]) * inv_std[c];
            }
        }
        let mut y = x_hat.clone();
        for row in y.data_mut().chunks_mut(self.channels) {
            for (c, v) in row.iter_mut().enumerate() {
                *v = *v * self.gamma.value[c] + self.beta.value[c];
            }
        }
        (y, x_hat)
    }

    /// Normalizes with batch statistics. Running statistics are not touched;
    /// call [`BatchNormLayer::update_running`] with the returned cache.
    pub fn forward_train(&self, x: &Tensor3<T>) -> Result<(Tensor3<T>, BatchNormCache<T>)> {
        self.check(x)?;
        if x.batch() < 2 {
            return Err(Error::DegenerateBatch(x.batch()));
        }
        let n = T::lit((x.batch() * x.len()) as f64);
        let mut mean = vec![T::zero(); self.channels];
        for row in x.data().chunks(self.channels) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); self.channels];
        for row in x.data().chunks(self.channels) {
            for (c, &v) in row.iter().enumerate() {
                let d = v - mean[c];
                var[c] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v = *v / n);
        let inv_std: Vec<T> = var
            .iter()
            .map(|&v| T::one() / (v + T::lit(self.eps)).sqrt())
            .collect();
        let (y, x_hat) = self.affine(x, &mean, &inv_std);
        Ok((
            y,
            BatchNormCache {
                x_hat,
                mean,
                var,
                inv_std,
            },
        ))
    }

    /// Exponential moving average of batch mean and unbiased batch variance.
    pub fn update_running(&mut self, cache: &BatchNormCache<T>) {
        let n = (cache.x_hat.batch() * cache.x_hat.len()) as f64;
        let unbias = T::lit(n / (n - 1.0));
        let m = T::lit(self.momentum);
        let keep = T::one() - m;
        for c in 0..self.channels {
            self.running_mean[c] = keep * self.running_mean[c] + m * cache.mean[c];
            self.running_var[c] = keep * self.running_var[c] + m * cache.var[c] * unbias;
        }
    }

    pub fn forward_eval(&self, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        self.check(x)?;
        let inv_std: Vec<T> = self
            .running_var
            .iter()
            .map(|&v| T::one() / (v + T::lit(self.eps)).sqrt())
            .collect();
        Ok(self.affine(x, &self.running_mean, &inv_std).0)
    }

    /// Returns `(grad_x, grad_gamma, grad_beta)` for a training-mode pass.
    pub fn backward(
        &self,
        cache: &BatchNormCache<T>,
        grad_out: &Tensor3<T>,
    ) -> Result<(Tensor3<T>, Vec<T>, Vec<T>)> {
        cache.x_hat.same_shape(grad_out)?;
        let ch = self.channels;
        let n = T::lit((grad_out.batch() * grad_out.len()) as f64);
        let mut g_gamma = vec![T::zero(); ch];
        let mut g_beta = vec![T::zero(); ch];
        for (grow, xrow) in grad_out.data().chunks(ch).zip(cache.x_hat.data().chunks(ch)) {
            for c in 0..ch {
                g_beta[c] += grow[c];
                g_gamma[c] += grow[c] * xrow[c];
            }
        }
        let mut gx = grad_out.clone();
        for (grow, xrow) in gx.data_mut().chunks_mut(ch).zip(cache.x_hat.data().chunks(ch)) {
            for c in 0..ch {
                let k = self.gamma.value[c] * cache.inv_std[c] / n;
                grow[c] = k * (n * grow[c] - g_beta[c] - xrow[c] * g_gamma[c]);
            }
        }
        Ok((gx, g_gamma, g_beta))
    }

    pub fn backward_accumulate(
        &mut self,
        cache: &BatchNormCache<T>,
        grad_out: &Tensor3<T>,
    ) -> Result<Tensor3<T>> {
        let (gx, gg, gb) = self.backward(cache, grad_out)?;
        self.gamma.accumulate(&gg);
        self.beta.accumulate(&gb);
        Ok(gx)
    }
}

impl<T: Scalar> Module<T> for BatchNormLayer<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }
}
