//! Central finite-difference checks of the hand-written backward passes.
//!
//! Every check uses the scalar probe `L = Σ G ⊙ f(x)` with a random `G`,
//! so the analytic gradient is the layer backward applied to `G`. The
//! error of one coordinate is `|a − n| / max(|a|, |n|, 1e-6)`.

use crate::error::Result;
use crate::ndiff::{
    upsample, upsample_backward, Activation, BatchNormLayer, Conv1dLayer, DenseLayer, Tensor3,
    UpsampleMode,
};
use crate::rng::Rng;

pub const FD_STEP: f64 = 1e-4;
const ABS_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Numeric gradient of `eval(i, δ)` (the probe with coordinate `i` offset
/// by `δ`) over `n` coordinates.
pub fn central_difference(n: usize, h: f64, mut eval: impl FnMut(usize, f64) -> f64) -> Vec<f64> {
    (0..n)
        .map(|i| (eval(i, h) - eval(i, -h)) / (2.0 * h))
        .collect()
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    Conv1d,
    Dense,
    BatchNorm,
    Upsample(UpsampleMode),
    Activation(Activation),
    /// dense → tanh → dense
    TanhChain,
}

/// Random small problem for one check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseSpec {
    pub batch: usize,
    pub len: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k_len: usize,
    pub stride: usize,
    pub seed: u64,
}

impl CaseSpec {
    /// The small conv case: batch 2, length 12, 2 → 3 channels, kernel 3.
    pub fn small(seed: u64) -> Self {
        Self {
            batch: 2,
            len: 12,
            in_ch: 2,
            out_ch: 3,
            k_len: 3,
            stride: 1,
            seed,
        }
    }

    /// A randomized case with every dimension drawn from a small range.
    pub fn random(seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let stride = if rng.below(2) == 0 { 1 } else { 4 };
        Self {
            batch: 2 + rng.below(3),
            len: 8 + rng.below(9),
            in_ch: 1 + rng.below(3),
            out_ch: 1 + rng.below(3),
            k_len: 1 + 2 * rng.below(3),
            stride,
            seed,
        }
    }
}

pub(crate) fn random_tensor(rng: &mut Rng, b: usize, l: usize, c: usize) -> Tensor3<f64> {
    Tensor3::from_vec((0..b * l * c).map(|_| rng.next_normal()).collect(), b, l, c)
        .expect("finite normal draws")
}

fn away_from_zero(t: &mut Tensor3<f64>) {
    for v in t.data_mut() {
        if v.abs() < 1e-2 {
            *v = if *v < 0.0 { -1e-2 } else { 1e-2 };
        }
    }
}

fn randomize(values: &mut [f64], rng: &mut Rng, scale: f64) {
    for v in values {
        *v = scale * rng.next_normal();
    }
}

fn offset(t: &Tensor3<f64>, i: usize, d: f64) -> Tensor3<f64> {
    let mut t = t.clone();
    t.data_mut()[i] += d;
    t
}

/// Max relative error between analytic and central-difference gradients
/// over all inputs and parameters of one layer kind.
pub fn grad_check(kind: LayerKind, case: &CaseSpec) -> Result<f64> {
    let mut rng = Rng::new(case.seed);
    let h = FD_STEP;
    let CaseSpec {
        batch: b,
        len,
        in_ch,
        out_ch,
        ..
    } = *case;
    let err = match kind {
        LayerKind::Conv1d => {
            let pad = (case.k_len - 1) / 2;
            let mut layer =
                Conv1dLayer::<f64>::new("c", case.k_len, in_ch, out_ch, case.stride, (pad, case.k_len - 1 - pad), &mut rng)?;
            randomize(&mut layer.bias.value, &mut rng, 0.5);
            let x = random_tensor(&mut rng, b, len, in_ch);
            let out_len = layer.out_len(len)?;
            let g = random_tensor(&mut rng, b, out_len, out_ch);
            let an = layer.backward(&x, &g)?;
            let probe = |l: &Conv1dLayer<f64>, x: &Tensor3<f64>| l.forward(x).map(|y| y.dot(&g)).unwrap();
            let nx = central_difference(x.data().len(), h, |i, d| probe(&layer, &offset(&x, i, d)));
            let nk = central_difference(layer.kernel.len(), h, |i, d| {
                let mut l = layer.clone();
                l.kernel.value[i] += d;
                probe(&l, &x)
            });
            let nb = central_difference(layer.bias.len(), h, |i, d| {
                let mut l = layer.clone();
                l.bias.value[i] += d;
                probe(&l, &x)
            });
            max_relative_error(an.x.data(), &nx)
                .max(max_relative_error(&an.kernel, &nk))
                .max(max_relative_error(&an.bias, &nb))
        }
        LayerKind::Dense => {
            let mut layer = DenseLayer::<f64>::new("d", len * in_ch, out_ch, &mut rng);
            randomize(&mut layer.bias.value, &mut rng, 0.5);
            let x = random_tensor(&mut rng, b, len, in_ch);
            let g = random_tensor(&mut rng, b, 1, out_ch);
            let an = layer.backward(&x, &g)?;
            let probe = |l: &DenseLayer<f64>, x: &Tensor3<f64>| l.forward(x).map(|y| y.dot(&g)).unwrap();
            let nx = central_difference(x.data().len(), h, |i, d| probe(&layer, &offset(&x, i, d)));
            let nw = central_difference(layer.weights.len(), h, |i, d| {
                let mut l = layer.clone();
                l.weights.value[i] += d;
                probe(&l, &x)
            });
            let nb = central_difference(layer.bias.len(), h, |i, d| {
                let mut l = layer.clone();
                l.bias.value[i] += d;
                probe(&l, &x)
            });
            max_relative_error(an.x.data(), &nx)
                .max(max_relative_error(&an.weights, &nw))
                .max(max_relative_error(&an.bias, &nb))
        }
        LayerKind::BatchNorm => {
            let mut layer = BatchNormLayer::<f64>::new("bn", in_ch);
            randomize(&mut layer.gamma.value, &mut rng, 1.0);
            randomize(&mut layer.beta.value, &mut rng, 1.0);
            let x = random_tensor(&mut rng, b, len, in_ch);
            let g = random_tensor(&mut rng, b, len, in_ch);
            let (_, cache) = layer.forward_train(&x)?;
            let (gx, gg, gb) = layer.backward(&cache, &g)?;
            let probe = |l: &BatchNormLayer<f64>, x: &Tensor3<f64>| {
                l.forward_train(x).map(|(y, _)| y.dot(&g)).unwrap()
            };
            let nx = central_difference(x.data().len(), h, |i, d| probe(&layer, &offset(&x, i, d)));
            let ng = central_difference(in_ch, h, |i, d| {
                let mut l = layer.clone();
                l.gamma.value[i] += d;
                probe(&l, &x)
            });
            let nb = central_difference(in_ch, h, |i, d| {
                let mut l = layer.clone();
                l.beta.value[i] += d;
                probe(&l, &x)
            });
            max_relative_error(gx.data(), &nx)
                .max(max_relative_error(&gg, &ng))
                .max(max_relative_error(&gb, &nb))
        }
        LayerKind::Upsample(mode) => {
            let x = random_tensor(&mut rng, b, len, in_ch);
            let g = random_tensor(&mut rng, b, 4 * len, in_ch);
            let an = upsample_backward(&g, 4, mode)?;
            let nx = central_difference(x.data().len(), h, |i, d| {
                upsample(&offset(&x, i, d), 4, mode).unwrap().dot(&g)
            });
            max_relative_error(an.data(), &nx)
        }
        LayerKind::Activation(act) => {
            let mut x = random_tensor(&mut rng, b, len, in_ch);
            if act.has_kink() {
                away_from_zero(&mut x);
            }
            let g = random_tensor(&mut rng, b, len, in_ch);
            let an = act.backward(&x, &g)?;
            let nx = central_difference(x.data().len(), h, |i, d| act.forward(&offset(&x, i, d)).dot(&g));
            max_relative_error(an.data(), &nx)
        }
        LayerKind::TanhChain => {
            let first = DenseLayer::<f64>::new("d1", len * in_ch, out_ch + 2, &mut rng);
            let second = DenseLayer::<f64>::new("d2", out_ch + 2, out_ch, &mut rng);
            let x = random_tensor(&mut rng, b, len, in_ch);
            let g = random_tensor(&mut rng, b, 1, out_ch);
            let run = |f: &DenseLayer<f64>, s: &DenseLayer<f64>, x: &Tensor3<f64>| -> f64 {
                let a = f.forward(x).unwrap();
                s.forward(&Activation::Tanh.forward(&a)).unwrap().dot(&g)
            };
            let a = first.forward(&x)?;
            let t = Activation::Tanh.forward(&a);
            let g2 = second.backward(&t, &g)?;
            let ga = Activation::Tanh.backward(&a, &g2.x)?;
            let g1 = first.backward(&x, &ga)?;
            let nx = central_difference(x.data().len(), h, |i, d| run(&first, &second, &offset(&x, i, d)));
            let nw1 = central_difference(first.weights.len(), h, |i, d| {
                let mut l = first.clone();
                l.weights.value[i] += d;
                run(&l, &second, &x)
            });
            let nw2 = central_difference(second.weights.len(), h, |i, d| {
                let mut l = second.clone();
                l.weights.value[i] += d;
                run(&first, &l, &x)
            });
            max_relative_error(g1.x.data(), &nx)
                .max(max_relative_error(&g1.weights, &nw1))
                .max(max_relative_error(&g2.weights, &nw2))
        }
    };
    Ok(err)
}
