use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cyclometrics::{basis_rows, feature_table, fid, matrix_from_rows, Standardizer, DEFAULT_PEAK_THRESH};
use crate::error::{Error, Result};
use crate::ndiff::{Blob, Checkpoint, Module, OptimizerState, Param, Tensor3};
use crate::nggan::config::NgganConfig;
use crate::nggan::model::{build_model, critic_loss, generator_loss, latent_batch, NgganModel};
use crate::rng::Rng;
use crate::trace::{NoiseTrace, TraceSet};

/// Substream ids; epochs use `EPOCH_STREAM + epoch`.
const EVAL_STREAM: u64 = 0xE7A1;
const EPOCH_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub fid: Option<f64>,
    pub seconds: f64,
    /// Largest |w| in the critic after any critic step of the epoch.
    pub max_abs_critic_weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    /// FID of the model as passed in, before any update this call.
    pub initial_fid: Option<f64>,
    pub epochs: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn final_fid(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.fid)
    }
}

/// Where training writes its artifacts; all optional.
#[derive(Debug, Clone, Default)]
pub struct TrainOutput {
    /// Receives `last.ngck` every epoch, `best.ngck` on FID improvement and
    /// `train_log.csv`.
    pub dir: Option<PathBuf>,
    /// Called after every epoch.
    pub verbose: bool,
}

/// Train / held-out split and the fixed material of the FID monitor.
struct Monitor {
    standardizer: Standardizer,
    held_out: DMatrix<f64>,
    count: usize,
}

impl Monitor {
    fn new(train: &TraceSet, held_out: &TraceSet) -> Result<Self> {
        let tf = matrix_from_rows(&basis_rows(&feature_table(train, DEFAULT_PEAK_THRESH)?));
        let standardizer = Standardizer::fit(&tf)?;
        let hf = matrix_from_rows(&basis_rows(&feature_table(held_out, DEFAULT_PEAK_THRESH)?));
        Ok(Self {
            held_out: standardizer.apply(&hf),
            standardizer,
            count: held_out.count(),
        })
    }

    fn fid(&self, model: &NgganModel<f32>, rng: &Rng) -> Result<f64> {
        let fake = generate(model, self.count, rng)?;
        let feats = match feature_table(&fake, DEFAULT_PEAK_THRESH) {
            Ok(f) => f,
            // constant generator output has no defined moments
            Err(Error::DegenerateInput(_)) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        let g = self.standardizer.apply(&matrix_from_rows(&basis_rows(&feats)));
        fid(&self.held_out, &g)
    }
}

/// Splits off the last `holdout_frac` of the set for FID monitoring.
pub fn split_holdout(data: &TraceSet, holdout_frac: f64) -> Result<(TraceSet, TraceSet)> {
    let n = data.count();
    let held = ((n as f64 * holdout_frac).round() as usize).max(crate::cyclometrics::BASIS_DIM + 1);
    if held + 2 > n {
        return Err(Error::InvalidConfig(format!(
            "{n} traces leave no training data after holding out {held} for FID"
        )));
    }
    Ok((data.slice(0..n - held)?, data.slice(n - held..n)?))
}

fn to_batch(set: &TraceSet, idx: &[usize]) -> Result<Tensor3<f32>> {
    let len = set.trace_len();
    let mut v = Vec::with_capacity(idx.len() * len);
    for &i in idx {
        v.extend_from_slice(set.traces()[i].samples());
    }
    Tensor3::from_vec(v, idx.len(), len, 1)
}

fn scores(t: &Tensor3<f32>) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

fn check_finite(v: f64, what: &str, epoch: usize, step: u64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerics(format!("{what} became {v} at epoch {epoch}, critic step {step}")))
    }
}

/// Wasserstein training with weight clipping.
///
/// Each epoch shuffles the training split and runs one critic update per
/// batch; every `critic_steps_per_gen`-th critic update is followed by one
/// generator update. FID against the held-out split is evaluated every
/// `eval_every` epochs and drives early stopping.
pub fn train(
    mut model: NgganModel<f32>,
    data: &TraceSet,
    rng: &Rng,
    out: &TrainOutput,
) -> Result<(NgganModel<f32>, TrainHistory)> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if data.trace_len() != cfg.trace_len() {
        return Err(Error::InvalidConfig(format!(
            "model expects traces of {} samples, data has {}",
            cfg.trace_len(),
            data.trace_len()
        )));
    }
    if data.max_abs() > 1.0 {
        return Err(Error::InvalidConfig("training data must be normalized to [-1, 1]".into()));
    }
    let mut history = TrainHistory::default();
    if model.epoch >= cfg.epochs {
        return Ok((model, history));
    }
    model.sample_rate_hz = data.sample_rate_hz();
    let (train_set, held_out) = split_holdout(data, cfg.holdout_frac)?;
    let monitor = Monitor::new(&train_set, &held_out)?;
    let eval_rng = rng.substream(EVAL_STREAM);
    history.initial_fid = Some(monitor.fid(&model, &eval_rng)?);

    let mut log = match &out.dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("train_log.csv");
            let fresh = model.epoch == 0 || !path.exists();
            let mut f = fs::OpenOptions::new().create(true).append(!fresh).write(true).truncate(fresh).open(path)?;
            if fresh {
                writeln!(f, "epoch,d_loss,g_loss,fid,seconds")?;
            }
            Some(f)
        }
        None => None,
    };

    let n = train_set.count();
    let batch = cfg.batch.min(n);
    let batches = n / batch;
    while model.epoch < cfg.epochs {
        let start = Instant::now();
        let epoch = model.epoch + 1;
        let mut er = rng.substream(EPOCH_STREAM + epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        er.shuffle(&mut order);
        let (mut d_sum, mut g_sum, mut g_count, mut last_fake) = (0.0, 0.0, 0usize, 0.0);
        let mut w_max: f64 = 0.0;
        for b in 0..batches {
            let real = to_batch(&train_set, &order[b * batch..(b + 1) * batch])?;
            let d_loss = critic_step(&mut model, &real, &mut er)?;
            check_finite(d_loss.0, "critic loss", epoch, model.critic_steps)?;
            d_sum += d_loss.0;
            last_fake = d_loss.1;
            w_max = w_max.max(model.max_abs_critic_weight());
            if model.critic_steps % cfg.critic_steps_per_gen as u64 == 0 {
                let g = generator_step(&mut model, batch, &mut er)?;
                check_finite(g, "generator loss", epoch, model.critic_steps)?;
                g_sum += g;
                g_count += 1;
            }
        }
        let fid = if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            Some(monitor.fid(&model, &eval_rng)?)
        } else {
            None
        };
        model.epoch = epoch;
        // gradients are scratch; clearing them makes the in-memory model equal its checkpoint
        model.generator.zero_grad();
        model.critic.zero_grad();
        let mut improved = false;
        if let Some(f) = fid {
            if model.best_fid.map_or(true, |b| f < b) {
                model.best_fid = Some(f);
                model.stale_evals = 0;
                improved = true;
            } else {
                model.stale_evals += 1;
            }
        }
        let rec = EpochRecord {
            epoch,
            d_loss: d_sum / batches as f64,
            g_loss: if g_count > 0 { g_sum / g_count as f64 } else { -last_fake },
            fid,
            seconds: start.elapsed().as_secs_f64(),
            max_abs_critic_weight: w_max,
        };
        if let Some(dir) = &out.dir {
            let ck = to_checkpoint(&model)?;
            ck.save(&dir.join("last.ngck"))?;
            if improved {
                ck.save(&dir.join("best.ngck"))?;
            }
        }
        if let Some(f) = log.as_mut() {
            let fid_txt = rec.fid.map(|v| v.to_string()).unwrap_or_default();
            writeln!(f, "{},{},{},{},{:.3}", rec.epoch, rec.d_loss, rec.g_loss, fid_txt, rec.seconds)?;
        }
        if out.verbose {
            eprintln!(
                "epoch {:>4}  d_loss {:+.5}  g_loss {:+.5}  fid {}  {:.1}s",
                rec.epoch,
                rec.d_loss,
                rec.g_loss,
                rec.fid.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
                rec.seconds
            );
        }
        history.epochs.push(rec);
        if cfg.early_stop_patience > 0 && model.stale_evals >= cfg.early_stop_patience {
            history.stopped_early = true;
            break;
        }
    }
    Ok((model, history))
}

/// One critic update; returns `(critic loss, mean fake score)`.
fn critic_step(model: &mut NgganModel<f32>, real: &Tensor3<f32>, rng: &mut Rng) -> Result<(f64, f64)> {
    let batch = real.batch();
    let z = latent_batch::<f32>(rng, batch, model.config.latent_dim);
    let (fake, gcache) = model.generator.forward_train(&z)?;
    model.generator.update_running(&gcache);

    model.critic.zero_grad();
    let (s_real, c_real) = model.critic.forward_train(real, Some(rng))?;
    let (s_fake, c_fake) = model.critic.forward_train(&fake, Some(rng))?;
    let (dr, df) = (scores(&s_real), scores(&s_fake));
    let loss = critic_loss(&dr, &df)?;
    let w = 1.0 / batch as f32;
    model.critic.backward(&c_real, &Tensor3::from_vec(vec![-w; batch], batch, 1, 1)?)?;
    model.critic.backward(&c_fake, &Tensor3::from_vec(vec![w; batch], batch, 1, 1)?)?;
    model.opt_d.step(&mut model.critic.params_mut())?;
    model.critic_steps += 1;
    Ok((loss, df.iter().sum::<f64>() / batch as f64))
}

/// One generator update through the (unchanged) critic; returns its loss.
fn generator_step(model: &mut NgganModel<f32>, batch: usize, rng: &mut Rng) -> Result<f64> {
    let z = latent_batch::<f32>(rng, batch, model.config.latent_dim);
    model.generator.zero_grad();
    let (fake, gcache) = model.generator.forward_train(&z)?;
    model.generator.update_running(&gcache);
    let (s, ccache) = model.critic.forward_train(&fake, Some(rng))?;
    let loss = generator_loss(&scores(&s));
    let seed = Tensor3::from_vec(vec![-1.0 / batch as f32; batch], batch, 1, 1)?;
    let gx = model.critic.backward(&ccache, &seed)?;
    model.critic.zero_grad();
    model.generator.backward(&gcache, &gx)?;
    model.opt_g.step(&mut model.generator.params_mut())?;
    Ok(loss)
}

/// `n` traces from the inference-mode generator. Trace `i` uses latent
/// substream `i`, so output does not depend on batching or threads.
pub fn generate(model: &NgganModel<f32>, n: usize, rng: &Rng) -> Result<TraceSet> {
    if n == 0 {
        return Err(Error::InvalidParam("generate needs a count >= 1".into()));
    }
    let dim = model.config.latent_dim;
    let chunk = 32;
    let chunks: Vec<Vec<NoiseTrace>> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let ids: Vec<u64> = (c * chunk..((c + 1) * chunk).min(n)).map(|i| i as u64).collect();
            let mut z = Vec::with_capacity(ids.len() * dim);
            for &i in &ids {
                z.extend(latent_batch::<f32>(&mut rng.substream(i), 1, dim).into_vec());
            }
            let x = model.generator.forward_eval(&Tensor3::from_vec(z, ids.len(), 1, dim)?)?;
            (0..ids.len())
                .map(|b| NoiseTrace::new(x.item(b).to_vec(), model.sample_rate_hz))
                .collect()
        })
        .collect::<Result<_>>()?;
    TraceSet::new("generated", chunks.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    epoch: usize,
    seed: u64,
    sample_rate_hz: f64,
    critic_steps: u64,
    opt_g_step: u64,
    opt_d_step: u64,
    best_fid: Option<f64>,
    stale_evals: usize,
    config_sha256: String,
    config: NgganConfig,
}

pub fn config_hash(cfg: &NgganConfig) -> Result<String> {
    let text = toml::to_string(cfg).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

fn param_blob(p: &Param<f32>, prefix: &str, data: &[f32]) -> Blob {
    Blob {
        name: format!("{prefix}{}", p.name),
        shape: p.shape.clone(),
        data: data.to_vec(),
    }
}

fn model_params(model: &NgganModel<f32>) -> Vec<&Param<f32>> {
    let mut v = model.generator.params();
    v.extend(model.critic.params());
    v
}

pub fn to_checkpoint(model: &NgganModel<f32>) -> Result<Checkpoint> {
    let meta = CheckpointMeta {
        epoch: model.epoch,
        seed: model.seed,
        sample_rate_hz: model.sample_rate_hz,
        critic_steps: model.critic_steps,
        opt_g_step: model.opt_g.step,
        opt_d_step: model.opt_d.step,
        best_fid: model.best_fid,
        stale_evals: model.stale_evals,
        config_sha256: config_hash(&model.config)?,
        config: model.config.clone(),
    };
    let mut blobs: Vec<Blob> = model_params(model).into_iter().map(|p| param_blob(p, "", &p.value)).collect();
    for bn in &model.generator.norms {
        let c = bn.channels;
        blobs.push(Blob { name: format!("{}.running_mean", bn.gamma.name), shape: vec![c], data: bn.running_mean.clone() });
        blobs.push(Blob { name: format!("{}.running_var", bn.gamma.name), shape: vec![c], data: bn.running_var.clone() });
    }
    for (tag, opt, params) in [
        ("opt_g", &model.opt_g, model.generator.params()),
        ("opt_d", &model.opt_d, model.critic.params()),
    ] {
        for ((m, v), p) in opt.moments.iter().zip(params) {
            blobs.push(param_blob(p, &format!("{tag}.m."), m));
            blobs.push(param_blob(p, &format!("{tag}.v."), v));
        }
    }
    Ok(Checkpoint {
        metadata: toml::to_string(&meta).map_err(|e| Error::Format(e.to_string()))?,
        blobs,
    })
}

pub fn from_checkpoint(ck: &Checkpoint) -> Result<NgganModel<f32>> {
    let meta: CheckpointMeta =
        toml::from_str(&ck.metadata).map_err(|e| Error::Format(format!("checkpoint metadata: {e}")))?;
    if config_hash(&meta.config)? != meta.config_sha256 {
        return Err(Error::Format("checkpoint config hash mismatch".into()));
    }
    let mut model: NgganModel<f32> = build_model(&meta.config, meta.sample_rate_hz, &Rng::new(meta.seed))?;
    let load = |p: &mut Param<f32>, name: &str| -> Result<()> {
        let b = ck.blob(name)?;
        if b.data.len() != p.len() {
            return Err(Error::Format(format!("blob {name} has {} values, expected {}", b.data.len(), p.len())));
        }
        p.value.copy_from_slice(&b.data);
        Ok(())
    };
    for p in model.generator.params_mut() {
        let name = p.name.clone();
        load(p, &name)?;
    }
    for p in model.critic.params_mut() {
        let name = p.name.clone();
        load(p, &name)?;
    }
    for bn in &mut model.generator.norms {
        let base = bn.gamma.name.clone();
        bn.running_mean = ck.blob(&format!("{base}.running_mean"))?.data.clone();
        bn.running_var = ck.blob(&format!("{base}.running_var"))?.data.clone();
    }
    let moments = |opt: &mut OptimizerState<f32>, tag: &str, names: Vec<String>, step: u64| -> Result<()> {
        opt.step = step;
        if step == 0 {
            return Ok(());
        }
        opt.moments = names
            .iter()
            .map(|n| Ok((ck.blob(&format!("{tag}.m.{n}"))?.data.clone(), ck.blob(&format!("{tag}.v.{n}"))?.data.clone())))
            .collect::<Result<_>>()?;
        Ok(())
    };
    let gnames = model.generator.params().iter().map(|p| p.name.clone()).collect();
    let dnames = model.critic.params().iter().map(|p| p.name.clone()).collect();
    moments(&mut model.opt_g, "opt_g", gnames, meta.opt_g_step)?;
    moments(&mut model.opt_d, "opt_d", dnames, meta.opt_d_step)?;
    model.epoch = meta.epoch;
    model.critic_steps = meta.critic_steps;
    model.best_fid = meta.best_fid;
    model.stale_evals = meta.stale_evals;
    Ok(model)
}

pub fn save_model(model: &NgganModel<f32>, path: &Path) -> Result<()> {
    to_checkpoint(model)?.save(path)
}

pub fn load_model(path: &Path) -> Result<NgganModel<f32>> {
    from_checkpoint(&Checkpoint::load(path)?)
}
