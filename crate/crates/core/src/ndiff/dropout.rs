use crate::ndiff::{Scalar, Tensor3};
use crate::rng::Rng;

/// Inverted dropout: kept units are scaled by `1 / (1 − rate)` at train
/// time so inference is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    /// Applies a fresh mask and returns it for the backward pass.
    pub fn forward_train<T: Scalar>(&self, x: &Tensor3<T>, rng: &mut Rng) -> (Tensor3<T>, Vec<T>) {
        if self.rate <= 0.0 {
            return (x.clone(), vec![T::one(); x.data().len()]);
        }
        let keep = T::lit(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..x.data().len())
            .map(|_| {
                if rng.next_f64() < self.rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let mut y = x.clone();
        for (v, &m) in y.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        (y, mask)
    }

    pub fn backward<T: Scalar>(mask: &[T], grad_out: &Tensor3<T>) -> Tensor3<T> {
        let mut g = grad_out.clone();
        for (v, &m) in g.data_mut().iter_mut().zip(mask) {
            *v *= m;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_expectation() {
        let x = Tensor3::<f64>::from_vec(vec![1.0; 100_000], 1, 100_000, 1).unwrap();
        let (y, mask) = Dropout { rate: 0.3 }.forward_train(&x, &mut Rng::new(1));
        let mean = y.data().iter().sum::<f64>() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.02);
        let g = Dropout::backward(&mask, &x);
        assert_eq!(g, y);
    }

    #[test]
    fn zero_rate_is_identity() {
        let x = Tensor3::<f32>::from_vec(vec![0.5, -2.0], 1, 2, 1).unwrap();
        let (y, _) = Dropout { rate: 0.0 }.forward_train(&x, &mut Rng::new(1));
        assert_eq!(y, x);
    }
}
