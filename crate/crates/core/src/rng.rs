//! Deterministic random numbers.
//!
//! The generator is ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`), keyed
//! by `seed_from_u64(seed)`. Every [`Rng`] owns one 64-bit ChaCha stream id;
//! [`Rng::substream`] derives a child stream id with SplitMix64 so per-trace
//! or per-task streams never overlap and do not depend on scheduling.
//!
//! Conversions are pinned as well:
//! * uniform `[0, 1)`: the top 53 bits of one `u64` draw times 2^-53;
//! * Gaussian: Box–Muller on two uniform draws, both outputs used in order,
//!   with `libm` transcendental functions so results match across platforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded, splittable random source.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child stream `id`. Depends only on (seed, parent stream, id),
    /// never on how much of the parent has been consumed.
    pub fn substream(&self, id: u64) -> Rng {
        let child = splitmix64(self.stream ^ splitmix64(id.wrapping_add(1)));
        Self::with_stream(self.seed, child)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`; `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's multiply-shift with rejection keeps the draw unbiased.
        let n64 = n as u64;
        loop {
            let m = (self.inner.next_u64() as u128) * (n64 as u128);
            let low = m as u64;
            if low >= n64.wrapping_neg() % n64 {
                return (m >> 64) as usize;
            }
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// `n` uniform values in `[lo, hi)`.
pub fn rng_uniform(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidRange { lo, hi });
    }
    let width = hi - lo;
    Ok((0..n)
        .map(|_| {
            let v = lo + width * rng.next_f64();
            if v >= hi {
                hi.next_down()
            } else {
                v
            }
        })
        .collect())
}

/// `n` normal values with the given mean and standard deviation.
pub fn rng_gaussian(rng: &mut Rng, n: usize, mean: f64, std: f64) -> Result<Vec<f64>> {
    if !(std >= 0.0) || !std.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidParam(format!(
            "gaussian needs finite mean and std >= 0, got mean={mean}, std={std}"
        )));
    }
    Ok((0..n).map(|_| mean + std * rng.next_normal()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        (mean, m2.sqrt(), m3 / m2.powf(1.5), m4 / (m2 * m2))
    }

    #[test]
    fn same_seed_same_stream() {
        let a = rng_uniform(&mut Rng::new(7), 1000, -1.0, 1.0).unwrap();
        let b = rng_uniform(&mut Rng::new(7), 1000, -1.0, 1.0).unwrap();
        assert_eq!(a, b);
        let c = rng_gaussian(&mut Rng::new(7), 1000, 0.0, 1.0).unwrap();
        let d = rng_gaussian(&mut Rng::new(7), 1000, 0.0, 1.0).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn uniform_mean_within_three_sigma() {
        // sd of the mean = sqrt(1/3 / 1e6) = 5.8e-4; 0.01 is far outside 3 sigma.
        let xs = rng_uniform(&mut Rng::new(11), 1_000_000, -1.0, 1.0).unwrap();
        assert!(xs.iter().all(|&x| (-1.0..1.0).contains(&x)));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn uniform_rejects_empty_interval() {
        assert!(matches!(
            rng_uniform(&mut Rng::new(1), 3, 1.0, 1.0),
            Err(Error::InvalidRange { .. })
        ));
    }

    #[test]
    fn gaussian_zero_std_is_constant() {
        let xs = rng_gaussian(&mut Rng::new(3), 100, 2.5, 0.0).unwrap();
        assert!(xs.iter().all(|&x| x == 2.5));
        assert!(rng_gaussian(&mut Rng::new(3), 1, 0.0, -1.0).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let n = 1_000_000;
        let xs = rng_gaussian(&mut Rng::new(5), n, 0.0, 1.0).unwrap();
        let (mean, std, skew, kurt) = moments(&xs);
        assert!(mean.abs() <= 4.0 / 1000.0, "mean {mean}");
        assert!((std - 1.0).abs() <= 0.005, "std {std}");
        // 4 standard errors: sqrt(6/n) = 2.4e-3, sqrt(24/n) = 4.9e-3.
        assert!(skew.abs() <= 0.01, "skew {skew}");
        assert!((kurt - 3.0).abs() <= 0.05, "kurt {kurt}");
    }

    #[test]
    fn substreams_are_distinct_and_stable() {
        let root = Rng::new(42);
        let mut a = root.substream(0);
        let mut b = root.substream(1);
        assert_ne!(a.next_u64(), b.next_u64());

        let mut consumed = Rng::new(42);
        consumed.next_u64();
        assert_eq!(
            consumed.substream(1).next_u64(),
            root.substream(1).next_u64()
        );
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = Rng::new(9);
        let mut seen = [0usize; 5];
        for _ in 0..5000 {
            seen[rng.below(5)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
    }
}
