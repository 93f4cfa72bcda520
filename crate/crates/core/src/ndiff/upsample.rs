//! Length upsampling by an integer factor.
//!
//! Output position `f·i + j` (`0 ≤ j < f`) mixes `x[i]` and `x[i+1]`
//! (with `x[len] ≡ x[len−1]`) as `(1 − a_j)·x[i] + a_j·x[i+1]`:
//!
//! * nearest: `a_j = 0`
//! * linear:  `a_j = j / f`
//! * hybrid:  `a_j = j / (2f)`, the mean of the nearest and linear outputs.
//!
//! The backward pass applies the transpose of that linear map.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::ndiff::{Scalar, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpsampleMode {
    Nearest,
    Linear,
    Hybrid,
}

impl UpsampleMode {
    fn weight(self, j: usize, factor: usize) -> f64 {
        match self {
            UpsampleMode::Nearest => 0.0,
            UpsampleMode::Linear => j as f64 / factor as f64,
            UpsampleMode::Hybrid => j as f64 / (2 * factor) as f64,
        }
    }

    fn min_len(self) -> usize {
        match self {
            UpsampleMode::Nearest => 1,
            _ => 2,
        }
    }
}

impl FromStr for UpsampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(UpsampleMode::Nearest),
            "linear" => Ok(UpsampleMode::Linear),
            "hybrid" => Ok(UpsampleMode::Hybrid),
            other => Err(Error::Mode(format!(
                "upsample mode {other:?}; expected nearest, linear or hybrid"
            ))),
        }
    }
}

fn check<T: Scalar>(len: usize, factor: usize, mode: UpsampleMode) -> Result<()> {
    if factor == 0 {
        return shape_err("upsample factor must be positive");
    }
    if len < mode.min_len() {
        return shape_err(format!("{mode:?} upsampling needs length >= {}", mode.min_len()));
    }
    Ok(())
}

pub fn upsample<T: Scalar>(x: &Tensor3<T>, factor: usize, mode: UpsampleMode) -> Result<Tensor3<T>> {
    check::<T>(x.len(), factor, mode)?;
    let (b, len, ch) = x.shape();
    let mut out = Tensor3::zeros(b, len * factor, ch);
    let weights: Vec<T> = (0..factor).map(|j| T::lit(mode.weight(j, factor))).collect();
    let dst = out.data_mut();
    for bi in 0..b {
        for i in 0..len {
            let next = (i + 1).min(len - 1);
            for (j, &a) in weights.iter().enumerate() {
                let o = ((bi * len + i) * factor + j) * ch;
                for c in 0..ch {
                    let x0 = x.at(bi, i, c);
                    let x1 = x.at(bi, next, c);
                    dst[o + c] = x0 + a * (x1 - x0);
                }
            }
        }
    }
    Ok(out)
}

/// Transpose of [`upsample`]: maps an output-shaped gradient back to the
/// input length `grad.len() / factor`.
pub fn upsample_backward<T: Scalar>(
    grad: &Tensor3<T>,
    factor: usize,
    mode: UpsampleMode,
) -> Result<Tensor3<T>> {
    if factor == 0 || grad.len() % factor != 0 {
        return shape_err(format!(
            "gradient length {} not divisible by factor {factor}",
            grad.len()
        ));
    }
    let (b, out_len, ch) = grad.shape();
    let len = out_len / factor;
    check::<T>(len, factor, mode)?;
    let mut gx = Tensor3::zeros(b, len, ch);
    let weights: Vec<T> = (0..factor).map(|j| T::lit(mode.weight(j, factor))).collect();
    let dst = gx.data_mut();
    for bi in 0..b {
        for i in 0..len {
            let next = (i + 1).min(len - 1);
            for (j, &a) in weights.iter().enumerate() {
                for c in 0..ch {
                    let g = grad.at(bi, i * factor + j, c);
                    dst[(bi * len + i) * ch + c] += (T::one() - a) * g;
                    dst[(bi * len + next) * ch + c] += a * g;
                }
            }
        }
    }
    Ok(gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn row(v: &[f64]) -> Tensor3<f64> {
        Tensor3::from_vec(v.to_vec(), 1, v.len(), 1).unwrap()
    }

    #[test]
    fn documented_examples() {
        let x = row(&[1.0, 2.0]);
        let near = upsample(&x, 4, UpsampleMode::Nearest).unwrap();
        assert_eq!(near.data(), &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        let lin = upsample(&x, 4, UpsampleMode::Linear).unwrap();
        assert_eq!(lin.data(), &[1.0, 1.25, 1.5, 1.75, 2.0, 2.0, 2.0, 2.0]);
        let hyb = upsample(&x, 4, UpsampleMode::Hybrid).unwrap();
        assert_eq!(hyb.data(), &[1.0, 1.125, 1.25, 1.375, 2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn too_short_for_interpolation() {
        assert!(upsample(&row(&[1.0]), 4, UpsampleMode::Linear).is_err());
        assert!(upsample(&row(&[1.0]), 4, UpsampleMode::Nearest).is_ok());
        assert!(matches!("cubic".parse::<UpsampleMode>(), Err(Error::Mode(_))));
    }

    proptest! {
        #[test]
        fn backward_is_exact_adjoint(seed in any::<u64>(), len in 2usize..12, ch in 1usize..4, mode_ix in 0usize..3) {
            let mode = [UpsampleMode::Nearest, UpsampleMode::Linear, UpsampleMode::Hybrid][mode_ix];
            let mut rng = Rng::new(seed);
            let x = Tensor3::from_vec((0..2 * len * ch).map(|_| rng.next_normal()).collect(), 2, len, ch).unwrap();
            let g = Tensor3::from_vec((0..2 * 4 * len * ch).map(|_| rng.next_normal()).collect(), 2, 4 * len, ch).unwrap();
            let lhs = upsample(&x, 4, mode).unwrap().dot(&g);
            let rhs = x.dot(&upsample_backward(&g, 4, mode).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
