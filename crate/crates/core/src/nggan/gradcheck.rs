//! Finite-difference check of the composed networks.
//!
//! ReLU and leaky ReLU are not differentiable at 0, so a coordinate whose
//! ±h perturbation flips the sign of any pre-activation compares a one-sided
//! slope with a secant across the kink. Such coordinates are skipped and
//! counted. Dropout is disabled and normalization uses batch statistics.

use crate::error::Result;
use crate::ndiff::gradcheck::{relative_error, FD_STEP};
use crate::ndiff::{Module, Tensor3};
use crate::nggan::config::NgganConfig;
use crate::nggan::model::{build_model, latent_batch, NgganModel};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl NetworkCheck {
    fn merge(self, o: Self) -> Self {
        Self {
            max_rel_err: self.max_rel_err.max(o.max_rel_err),
            checked: self.checked + o.checked,
            skipped: self.skipped + o.skipped,
        }
    }
}

fn signs(kinks: &[Tensor3<f64>]) -> Vec<bool> {
    kinks.iter().flat_map(|t| t.data().iter().map(|&v| v > 0.0)).collect()
}

/// Evaluates `probe(δ) -> (loss, sign pattern)` at ±h for each coordinate.
fn check_coords(
    analytic: &[f64],
    base: &[bool],
    mut probe: impl FnMut(usize, f64) -> (f64, Vec<bool>),
) -> NetworkCheck {
    let mut out = NetworkCheck {
        max_rel_err: 0.0,
        checked: 0,
        skipped: 0,
    };
    for (i, &a) in analytic.iter().enumerate() {
        let (lp, sp) = probe(i, FD_STEP);
        let (lm, sm) = probe(i, -FD_STEP);
        if sp != base || sm != base {
            out.skipped += 1;
            continue;
        }
        out.checked += 1;
        out.max_rel_err = out.max_rel_err.max(relative_error(a, (lp - lm) / (2.0 * FD_STEP)));
    }
    out
}

fn perturbed<M: Module<f64> + Clone>(m: &M, i: usize, d: f64) -> M {
    let mut m = m.clone();
    let mut k = i;
    for p in m.params_mut() {
        if k < p.len() {
            p.value[k] += d;
            return m;
        }
        k -= p.len();
    }
    panic!("parameter index {i} out of range");
}

fn grads<M: Module<f64>>(m: &M) -> Vec<f64> {
    m.params().iter().flat_map(|p| p.grad.iter().copied()).collect()
}

fn offset(t: &Tensor3<f64>, i: usize, d: f64) -> Tensor3<f64> {
    let mut t = t.clone();
    t.data_mut()[i] += d;
    t
}

fn random_like(rng: &mut Rng, b: usize, l: usize, c: usize) -> Tensor3<f64> {
    Tensor3::from_vec((0..b * l * c).map(|_| rng.next_normal()).collect(), b, l, c).expect("finite")
}

/// Randomized toy configuration: 2 blocks on a base length of 4.
pub fn toy_config(rng: &mut Rng) -> NgganConfig {
    NgganConfig {
        latent_dim: 2 + rng.below(4),
        base_len: 4,
        base_ch: [4, 8][rng.below(2)],
        blocks: 2,
        dropout: 0.0,
        ..Default::default()
    }
}

/// Checks generator, critic and the composed generator objective of one
/// random toy model.
pub fn network_grad_check(seed: u64) -> Result<NetworkCheck> {
    let mut rng = Rng::new(seed);
    let cfg = toy_config(&mut rng);
    let batch = 2 + rng.below(3);
    let mut model: NgganModel<f64> = build_model(&cfg, 1.0, &Rng::new(seed ^ 0x9e37))?;
    // larger critic weights than the clip range keep the critic signal well above round-off
    for p in model.critic.params_mut() {
        for v in &mut p.value {
            *v = 0.3 * rng.next_normal();
        }
    }
    let z = latent_batch::<f64>(&mut rng, batch, cfg.latent_dim);
    let g_out = random_like(&mut rng, batch, cfg.trace_len(), 1);
    let x = random_like(&mut rng, batch, cfg.trace_len(), 1);
    let g_score = random_like(&mut rng, batch, 1, 1);

    // generator alone
    let gen = model.generator.clone();
    let gen_loss = |g: &crate::nggan::model::Generator<f64>, z: &Tensor3<f64>| {
        let (y, c) = g.forward_train(z).expect("toy shapes");
        (y.dot(&g_out), signs(c.kinks()))
    };
    let mut ga = gen.clone();
    ga.zero_grad();
    let (_, cache) = ga.forward_train(&z)?;
    let gz = ga.backward(&cache, &g_out)?;
    let base = signs(cache.kinks());
    let mut res = check_coords(&grads(&ga), &base, |i, d| gen_loss(&perturbed(&gen, i, d), &z));
    res = res.merge(check_coords(gz.data(), &base, |i, d| gen_loss(&gen, &offset(&z, i, d))));

    // critic alone
    let critic = model.critic.clone();
    let critic_loss = |c: &crate::nggan::model::Critic<f64>, x: &Tensor3<f64>| {
        let (y, cache) = c.forward_train(x, None).expect("toy shapes");
        (y.dot(&g_score), signs(cache.kinks()))
    };
    let mut ca = critic.clone();
    ca.zero_grad();
    let (_, cc) = ca.forward_train(&x, None)?;
    let gx = ca.backward(&cc, &g_score)?;
    let base = signs(cc.kinks());
    res = res.merge(check_coords(&grads(&ca), &base, |i, d| critic_loss(&perturbed(&critic, i, d), &x)));
    res = res.merge(check_coords(gx.data(), &base, |i, d| critic_loss(&critic, &offset(&x, i, d))));

    // generator objective through the critic
    let composed = |g: &crate::nggan::model::Generator<f64>| {
        let (y, gc) = g.forward_train(&z).expect("toy shapes");
        let (s, cc) = critic.forward_train(&y, None).expect("toy shapes");
        let loss = -s.data().iter().sum::<f64>() / batch as f64;
        let mut sig = signs(gc.kinks());
        sig.extend(signs(cc.kinks()));
        (loss, sig)
    };
    let mut ga = gen.clone();
    ga.zero_grad();
    let (y, gc) = ga.forward_train(&z)?;
    let (_, cc) = critic.forward_train(&y, None)?;
    let seed_grad = Tensor3::from_vec(vec![-1.0 / batch as f64; batch], batch, 1, 1)?;
    let gy = critic.clone().backward(&cc, &seed_grad)?;
    ga.backward(&gc, &gy)?;
    let mut base = signs(gc.kinks());
    base.extend(signs(cc.kinks()));
    res = res.merge(check_coords(&grads(&ga), &base, |i, d| composed(&perturbed(&gen, i, d))));
    Ok(res)
}
