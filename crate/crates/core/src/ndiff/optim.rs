//! Adaptive-moment optimizer with bias correction, optional L2 term and
//! optional post-step weight clipping.
//!
//! Per parameter element, with `g' = g + weight_decay·p`:
//!
//! ```text
//! m ← β1·m + (1−β1)·g'
//! v ← β2·v + (1−β2)·g'²
//! p ← p − lr · (m / (1−β1^t)) / (sqrt(v / (1−β2^t)) + eps)
//! p ← clamp(p, −clip, clip)            (when clip_value is set)
//! ```

use crate::error::{shape_err, Error, Result};
use crate::ndiff::param::Param;
use crate::ndiff::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub clip_value: Option<f64>,
    pub step: u64,
    /// First and second moments, one pair per parameter, in call order.
    pub moments: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidParam(format!("learning rate must be > 0, got {lr}")));
        }
        Ok(Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay: 0.0,
            clip_value: None,
            step: 0,
            moments: Vec::new(),
        })
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn with_clip(mut self, clip: Option<f64>) -> Self {
        self.clip_value = clip;
        self
    }

    /// One update of every parameter from its accumulated gradient.
    pub fn step(&mut self, params: &mut [&mut Param<T>]) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (vec![T::zero(); p.len()], vec![T::zero(); p.len()]))
                .collect();
        }
        if self.moments.len() != params.len() {
            return shape_err(format!(
                "optimizer tracks {} parameters, got {}",
                self.moments.len(),
                params.len()
            ));
        }
        for (p, (m, _)) in params.iter().zip(&self.moments) {
            if p.len() != m.len() || p.grad.len() != p.len() {
                return shape_err(format!("parameter {} changed size", p.name));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let c1 = T::lit(1.0 - self.beta1.powi(t));
        let c2 = T::lit(1.0 - self.beta2.powi(t));
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        let wd = T::lit(self.weight_decay);
        let clip = self.clip_value.map(T::lit);
        for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            let Param { value, grad, .. } = &mut **p;
            for i in 0..value.len() {
                let g = grad[i] + wd * value[i];
                m[i] = b1 * m[i] + one_b1 * g;
                v[i] = b2 * v[i] + one_b2 * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                let mut next = value[i] - lr * m_hat / (v_hat.sqrt() + eps);
                if let Some(c) = clip {
                    next = next.max(-c).min(c);
                }
                value[i] = next;
            }
        }
        Ok(())
    }
}

pub fn optimizer_step<T: Scalar>(
    state: &mut OptimizerState<T>,
    params: &mut [&mut Param<T>],
) -> Result<()> {
    state.step(params)
}
