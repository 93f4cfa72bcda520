//! 1-D convolution in cross-correlation form (the kernel is not flipped):
//!
//! `y[b, o, co] = bias[co] + Σ_k Σ_ci x[b, o·stride + k − pad_left, ci] · w[k, ci, co]`
//!
//! with zero padding outside `[0, length)`. The window of one output
//! position is a contiguous `k_len·in_ch` slice of the padded input, so both
//! passes reduce to strided matrix products.

use crate::error::{shape_err, Error, Result};
use crate::ndiff::param::{Module, Param};
use crate::ndiff::scalar::{gemm, View};
use crate::ndiff::{Scalar, Tensor3};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayer<T> {
    pub k_len: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub stride: usize,
    pub padding: (usize, usize),
    /// `(k_len, in_ch, out_ch)` row-major.
    pub kernel: Param<T>,
    pub bias: Param<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dGrads<T> {
    pub x: Tensor3<T>,
    pub kernel: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv1dLayer<T> {
    pub fn new(
        name: &str,
        k_len: usize,
        in_ch: usize,
        out_ch: usize,
        stride: usize,
        padding: (usize, usize),
        rng: &mut Rng,
    ) -> Result<Self> {
        if k_len == 0 || in_ch == 0 || out_ch == 0 {
            return shape_err("conv1d dimensions must be nonzero");
        }
        if ![1, 4].contains(&stride) {
            return Err(Error::InvalidParam(format!("conv1d stride must be 1 or 4, got {stride}")));
        }
        Ok(Self {
            k_len,
            in_ch,
            out_ch,
            stride,
            padding,
            kernel: Param::glorot(
                format!("{name}.kernel"),
                &[k_len, in_ch, out_ch],
                k_len * in_ch,
                k_len * out_ch,
                rng,
            ),
            bias: Param::zeros(format!("{name}.bias"), &[out_ch]),
        })
    }

    pub fn out_len(&self, len: usize) -> Result<usize> {
        let padded = len + self.padding.0 + self.padding.1;
        if padded < self.k_len {
            return shape_err(format!(
                "padded length {padded} shorter than kernel {}",
                self.k_len
            ));
        }
        Ok((padded - self.k_len) / self.stride + 1)
    }

    fn check_input(&self, x: &Tensor3<T>) -> Result<usize> {
        if x.channels() != self.in_ch {
            return shape_err(format!(
                "conv1d expects {} input channels, got {}",
                self.in_ch,
                x.channels()
            ));
        }
        self.out_len(x.len())
    }

    fn padded(&self, x: &Tensor3<T>, b: usize) -> Vec<T> {
        let (pl, pr) = self.padding;
        let mut buf = vec![T::zero(); (x.len() + pl + pr) * self.in_ch];
        buf[pl * self.in_ch..(pl + x.len()) * self.in_ch].copy_from_slice(x.item(b));
        buf
    }

    /// `(out_len × k_len·in_ch)` view of overlapping input windows.
    fn windows<'a>(&self, padded: &'a [T], out_len: usize) -> View<'a, T> {
        View {
            data: padded,
            rows: out_len,
            cols: self.k_len * self.in_ch,
            rs: self.stride * self.in_ch,
            cs: 1,
        }
    }

    fn kernel_view(&self) -> View<'_, T> {
        View::row_major(&self.kernel.value, self.k_len * self.in_ch, self.out_ch)
    }

    pub fn forward(&self, x: &Tensor3<T>) -> Result<Tensor3<T>> {
        let out_len = self.check_input(x)?;
        let mut out = Tensor3::zeros(x.batch(), out_len, self.out_ch);
        let per = out_len * self.out_ch;
        for b in 0..x.batch() {
            let padded = self.padded(x, b);
            let dst = &mut out.data_mut()[b * per..(b + 1) * per];
            for row in dst.chunks_mut(self.out_ch) {
                row.copy_from_slice(&self.bias.value);
            }
            gemm(self.windows(&padded, out_len), self.kernel_view(), T::one(), dst);
        }
        Ok(out)
    }

    /// Gradients of `Σ grad_out ⊙ forward(x)`.
    pub fn backward(&self, x: &Tensor3<T>, grad_out: &Tensor3<T>) -> Result<Conv1dGrads<T>> {
        let out_len = self.check_input(x)?;
        if grad_out.shape() != (x.batch(), out_len, self.out_ch) {
            return shape_err(format!(
                "conv1d grad_out shape {:?}, expected {:?}",
                grad_out.shape(),
                (x.batch(), out_len, self.out_ch)
            ));
        }
        let (pl, _) = self.padding;
        let win = self.k_len * self.in_ch;
        let mut gk = vec![T::zero(); win * self.out_ch];
        let mut gb = vec![T::zero(); self.out_ch];
        let mut gx = Tensor3::zeros(x.batch(), x.len(), self.in_ch);
        let mut dwin = vec![T::zero(); out_len * win];
        for b in 0..x.batch() {
            let padded = self.padded(x, b);
            let g = grad_out.item(b);
            let gview = View::row_major(g, out_len, self.out_ch);
            // kernel: windowsᵀ · g
            gemm(self.windows(&padded, out_len).t(), gview, T::one(), &mut gk);
            for row in g.chunks(self.out_ch) {
                for (a, &v) in gb.iter_mut().zip(row) {
                    *a += v;
                }
            }
            // input: g · kernelᵀ, then scatter overlapping windows back
            gemm(gview, self.kernel_view().t(), T::zero(), &mut dwin);
            let mut gpad = vec![T::zero(); padded.len()];
            for (o, row) in dwin.chunks(win).enumerate() {
                let start = o * self.stride * self.in_ch;
                for (a, &v) in gpad[start..start + win].iter_mut().zip(row) {
                    *a += v;
                }
            }
            let n = x.len() * self.in_ch;
            let dst = &mut gx.data_mut()[b * n..(b + 1) * n];
            dst.copy_from_slice(&gpad[pl * self.in_ch..pl * self.in_ch + n]);
        }
        Ok(Conv1dGrads {
            x: gx,
            kernel: gk,
            bias: gb,
        })
    }

    /// Backward pass that adds parameter gradients into the layer and
    /// returns the input gradient.
    pub fn backward_accumulate(
        &mut self,
        x: &Tensor3<T>,
        grad_out: &Tensor3<T>,
    ) -> Result<Tensor3<T>> {
        let g = self.backward(x, grad_out)?;
        self.kernel.accumulate(&g.kernel);
        self.bias.accumulate(&g.bias);
        Ok(g.x)
    }
}

impl<T: Scalar> Module<T> for Conv1dLayer<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.kernel, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.kernel, &mut self.bias]
    }
}

pub fn conv1d_forward<T: Scalar>(layer: &Conv1dLayer<T>, x: &Tensor3<T>) -> Result<Tensor3<T>> {
    layer.forward(x)
}

pub fn conv1d_backward<T: Scalar>(
    layer: &Conv1dLayer<T>,
    x: &Tensor3<T>,
    grad_out: &Tensor3<T>,
) -> Result<Conv1dGrads<T>> {
    layer.backward(x, grad_out)
}
