use crate::ndiff::Scalar;
use crate::rng::Rng;

/// A named trainable array with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        Self::filled(name, shape, T::zero())
    }

    pub fn filled(name: impl Into<String>, shape: &[usize], v: T) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            value: vec![v; n],
            grad: vec![T::zero(); n],
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut Rng,
    ) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut p = Self::zeros(name, shape);
        for v in &mut p.value {
            *v = T::lit(limit * (2.0 * rng.next_f64() - 1.0));
        }
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn accumulate(&mut self, g: &[T]) {
        debug_assert_eq!(g.len(), self.grad.len());
        for (a, &b) in self.grad.iter_mut().zip(g) {
            *a += b;
        }
    }
}

/// Anything that owns parameters.
pub trait Module<T: Scalar> {
    fn params(&self) -> Vec<&Param<T>>;
    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
