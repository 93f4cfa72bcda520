use crate::error::{shape_err, Error, Result};
use crate::ndiff::Scalar;

/// Dense `batch × length × channels` array, channel-last row-major:
/// element `(b, l, c)` lives at `(b * length + l) * channels + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    data: Vec<T>,
    batch: usize,
    len: usize,
    ch: usize,
}

impl<T: Scalar> Tensor3<T> {
    pub fn zeros(batch: usize, len: usize, ch: usize) -> Self {
        Self {
            data: vec![T::zero(); batch * len * ch],
            batch,
            len,
            ch,
        }
    }

    pub fn from_vec(data: Vec<T>, batch: usize, len: usize, ch: usize) -> Result<Self> {
        if data.len() != batch * len * ch {
            return shape_err(format!(
                "{} elements cannot form a {batch}x{len}x{ch} tensor",
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerics("tensor contains non-finite values".into()));
        }
        Ok(Self {
            data,
            batch,
            len,
            ch,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.len, self.ch)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.ch
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn at(&self, b: usize, l: usize, c: usize) -> T {
        self.data[(b * self.len + l) * self.ch + c]
    }

    /// Samples of batch element `b` (all positions and channels).
    pub fn item(&self, b: usize) -> &[T] {
        let n = self.len * self.ch;
        &self.data[b * n..(b + 1) * n]
    }

    /// Same data, new `(length, channels)` split.
    pub fn reshape(self, len: usize, ch: usize) -> Result<Self> {
        if len * ch != self.len * self.ch {
            return shape_err(format!(
                "cannot reshape {}x{} into {len}x{ch}",
                self.len, self.ch
            ));
        }
        Ok(Self {
            data: self.data,
            batch: self.batch,
            len,
            ch,
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            batch: self.batch,
            len: self.len,
            ch: self.ch,
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return shape_err(format!(
                "shape {:?} differs from {:?}",
                self.shape(),
                other.shape()
            ));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor3<U> {
        Tensor3 {
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            batch: self.batch,
            len: self.len,
            ch: self.ch,
        }
    }
}
