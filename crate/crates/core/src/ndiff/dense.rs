use crate::error::{shape_err, Result};
use crate::ndiff::param::{Module, Param};
use crate::ndiff::scalar::{gemm, View};
use crate::ndiff::{Scalar, Tensor3};
use crate::rng::Rng;

/// Fully connected layer `y = x·W + b` on flattened batch items.
///
/// Inputs of shape `(batch, len, ch)` are read as `batch × (len·ch)`;
/// the output has shape `(batch, 1, out_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `(in_dim, out_dim)` row-major.
    pub weights: Param<T>,
    pub bias: Param<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<T> {
    pub x: Tensor3<T>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(name: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: Param::glorot(format!("{name}.weights"), &[in_dim, out_dim], in_dim, out_dim, rng),
            bias: Param::zeros(format!("{name}.bias"), &[out_dim]),
        }
    }

    fn check(&self, x: &Tensor3<T>) -> Result<()> {
        if x.len() * x.channels() != self.in_dim {
            return shape_err(format!(
                "dense expects {} features per item, got {}",
                self.in_dim,
                x.len() * x.channels()
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        self.check(x)?;
        let b = x.batch();
        let mut out = Tensor3::zeros(b, 1, self.out_dim);
        for row in out.data_mut().chunks_mut(self.out_dim) {
            row.copy_from_slice(&self.bias.value);
        }
        gemm(
            View::row_major(x.data(), b, self.in_dim),
            View::row_major(&self.weights.value, self.in_dim, self.out_dim),
            T::one(),
            out.data_mut(),
        );
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor3<T>, grad_out: &Tensor3<T>) -> Result<DenseGrads<T>> {
        self.check(x)?;
        let b = x.batch();
        if grad_out.batch() != b || grad_out.len() * grad_out.channels() != self.out_dim {
            return shape_err(format!(
                "dense grad_out shape {:?} does not match batch {b} x {}",
                grad_out.shape(),
                self.out_dim
            ));
        }
        let g = View::row_major(grad_out.data(), b, self.out_dim);
        let mut gw = vec![T::zero(); self.in_dim * self.out_dim];
        gemm(View::row_major(x.data(), b, self.in_dim).t(), g, T::zero(), &mut gw);
        let mut gx = Tensor3::zeros(b, x.len(), x.channels());
        gemm(
            g,
            View::row_major(&self.weights.value, self.in_dim, self.out_dim).t(),
            T::zero(),
            gx.data_mut(),
        );
        let mut gb = vec![T::zero(); self.out_dim];
        for row in grad_out.data().chunks(self.out_dim) {
            for (a, &v) in gb.iter_mut().zip(row) {
                *a += v;
            }
        }
        Ok(DenseGrads {
            x: gx,
            weights: gw,
            bias: gb,
        })
    }

    pub fn backward_accumulate(&mut self, x: &Tensor3<T>, grad_out: &Tensor3<T>) -> Result<Tensor3<T>> {
        let g = self.backward(x, grad_out)?;
        self.weights.accumulate(&g.weights);
        self.bias.accumulate(&g.bias);
        Ok(g.x)
    }
}

impl<T: Scalar> Module<T> for DenseLayer<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weights, &mut self.bias]
    }
}

pub fn dense_forward<T: Scalar>(layer: &DenseLayer<T>, x: &Tensor3<T>) -> Result<Tensor3<T>> {
    layer.forward(x)
}

pub fn dense_backward<T: Scalar>(
    layer: &DenseLayer<T>,
    x: &Tensor3<T>,
    grad_out: &Tensor3<T>,
) -> Result<DenseGrads<T>> {
    layer.backward(x, grad_out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_zero_input() {
        let mut l = DenseLayer::<f64>::new("d", 3, 3, &mut Rng::new(1));
        l.weights.value = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let x = Tensor3::from_vec(vec![1.0, -2.0, 3.5, 0.0, 4.0, 5.0], 2, 1, 3).unwrap();
        assert_eq!(l.forward(&x).unwrap().data(), x.data());

        l.bias.value = vec![0.5, 1.5, -1.0];
        let zero = Tensor3::zeros(2, 3, 1);
        assert_eq!(l.forward(&zero).unwrap().data(), &[0.5, 1.5, -1.0, 0.5, 1.5, -1.0]);
    }

    #[test]
    fn wrong_width_is_shape_error() {
        let l = DenseLayer::<f64>::new("d", 4, 2, &mut Rng::new(1));
        assert!(l.forward(&Tensor3::zeros(1, 3, 1)).is_err());
    }
}
