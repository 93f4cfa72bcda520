use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ndiff::{Scalar, Tensor3};

/// Elementwise nonlinearities.
///
/// At `x = 0` the ReLU family uses the negative-side slope as subgradient
/// (0 for ReLU, `slope` for leaky ReLU).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::LeakyRelu(s) => {
                if x > T::zero() {
                    x
                } else {
                    x * T::lit(s)
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu(s) => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::lit(s)
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
        }
    }

    /// True where the derivative jumps; finite differences are unreliable
    /// across such points.
    pub fn has_kink(self) -> bool {
        !matches!(self, Activation::Tanh)
    }

    pub fn forward<T: Scalar>(self, x: &Tensor3<T>) -> Tensor3<T> {
        x.map(|v| self.apply(v))
    }

    /// `grad_in = grad_out ⊙ f'(x)` where `x` is the forward input.
    pub fn backward<T: Scalar>(self, x: &Tensor3<T>, grad_out: &Tensor3<T>) -> Result<Tensor3<T>> {
        x.same_shape(grad_out)?;
        let mut g = grad_out.clone();
        for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
            *gv *= self.derivative(xv);
        }
        Ok(g)
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "leaky_relu" => Ok(Activation::LeakyRelu(0.2)),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Mode(format!(
                "activation {other:?}; expected relu, leaky_relu or tanh"
            ))),
        }
    }
}

pub fn activation<T: Scalar>(kind: Activation, x: &Tensor3<T>) -> Tensor3<T> {
    kind.forward(x)
}
