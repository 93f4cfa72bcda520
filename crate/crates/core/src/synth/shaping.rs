use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Forward/inverse transform pair for one length.
#[derive(Clone)]
pub(crate) struct FftPair {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub(crate) fn new(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }
}

/// Frequency in Hz of bin `k` of a length-`len` transform, folded onto
/// `[0, fs/2]` so that a magnitude response evaluated on it is Hermitian.
pub(crate) fn folded_bin_hz(k: usize, len: usize, fs: f64) -> f64 {
    let k = if k <= len / 2 { k } else { len - k };
    k as f64 * fs / len as f64
}

/// Shaped Gaussian noise: white `N(0,1)` excitation, forward transform,
/// multiplication of every bin by `gain(|f|)`, inverse transform.
///
/// Returns the real part. The expected output variance for this gain is
/// `mean_k gain_k^2`, which callers use to pin an absolute RMS.
pub(crate) fn shaped_noise(
    fft: &FftPair,
    rng: &mut Rng,
    fs: f64,
    gain: impl Fn(f64) -> f64,
) -> Result<(Vec<f64>, f64)> {
    let len = fft.len;
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(rng.next_normal(), 0.0))
        .collect();
    fft.forward.process(&mut buf);
    let mut power = 0.0;
    for (k, c) in buf.iter_mut().enumerate() {
        let g = gain(folded_bin_hz(k, len, fs));
        power += g * g;
        *c *= g / len as f64;
    }
    fft.inverse.process(&mut buf);

    let rms = (buf.iter().map(|c| c.re * c.re).sum::<f64>() / len as f64).sqrt();
    let residue = buf.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if residue > 1e-9 * rms.max(f64::MIN_POSITIVE) && rms > 0.0 {
        return Err(Error::Numerics(format!(
            "shaped noise imaginary residue {residue:e} exceeds 1e-9 of rms {rms:e}"
        )));
    }
    Ok((buf.into_iter().map(|c| c.re).collect(), power / len as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_is_symmetric() {
        let len = 8;
        for k in 1..len {
            assert_eq!(folded_bin_hz(k, len, 8.0), folded_bin_hz(len - k, len, 8.0));
        }
        assert_eq!(folded_bin_hz(4, 8, 8.0), 4.0);
    }

    #[test]
    fn unit_gain_returns_excitation() {
        let mut planner = FftPlanner::new();
        let fft = FftPair::new(&mut planner, 64);
        let (x, p) = shaped_noise(&fft, &mut Rng::new(1), 1.0, |_| 1.0).unwrap();
        let mut rng = Rng::new(1);
        let w: Vec<f64> = (0..64).map(|_| rng.next_normal()).collect();
        assert_eq!(p, 1.0);
        for (a, b) in x.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
