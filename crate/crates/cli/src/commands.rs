use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plcnoise::cyclometrics::report::feature_stats;
use plcnoise::cyclometrics::{
    csc, csd, evaluate, exceedance_stats, feature_table, max_coeff_distribution, spectrogram,
};
use plcnoise::nggan::{build_model, generate, load_model, train, TrainOutput};
use plcnoise::trace::{load_traceset, normalize_maxabs, save_traceset, write_traceset_csv};
use plcnoise::{Error, NoiseTrace, Result, Rng, TraceSet};
use serde_json::json;

use crate::config::{required, resolve_metrics, LogLevel, RunConfig};
use crate::manifest::{hash_entry, Manifest};

struct Outcome {
    inputs: Vec<PathBuf>,
    artifacts: Vec<PathBuf>,
    summary: serde_json::Value,
}

fn table_of<T: serde::Serialize>(v: &T) -> Result<toml::Table> {
    toml::Table::try_from(v).map_err(|e| Error::InvalidConfig(e.to_string()))
}

pub fn run(command: &str, cfg: &mut RunConfig) -> Result<()> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    cfg.out = Some(out.clone());
    fs::create_dir_all(&out)?;
    let outcome = match command {
        "synth" => synth(cfg, &out)?,
        "train" => train_cmd(cfg, &out)?,
        "generate" => generate_cmd(cfg, &out)?,
        "evaluate" => evaluate_cmd(cfg, &out)?,
        "report" => report_cmd(cfg, &out)?,
        other => return Err(Error::InvalidConfig(format!("unknown command {other}"))),
    };
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: cfg.seed,
        config: cfg.clone(),
        inputs: outcome.inputs.iter().map(|p| hash_entry(p, None)).collect::<Result<_>>()?,
        artifacts: outcome
            .artifacts
            .iter()
            .map(|p| hash_entry(p, Some(&out)))
            .collect::<Result<_>>()?,
        summary: outcome.summary,
    };
    manifest.write(&out)?;
    if cfg.log_level != LogLevel::Quiet {
        println!("{command}: wrote {} artifact(s) to {}", manifest.artifacts.len(), out.display());
        if let serde_json::Value::Object(m) = &manifest.summary {
            for (k, v) in m {
                println!("  {k}: {v}");
            }
        }
    }
    Ok(())
}

fn synth(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let (model, len) = cfg.synth.resolve()?;
    let s = &mut cfg.synth;
    s.model = Some(table_of(&model)?);
    s.trace_len = Some(len);
    let set = model.generate(s.n_traces, len, &Rng::new(cfg.seed))?.with_name(s.name.clone());
    let path = out.join(format!("{}.ngts", s.name));
    save_traceset(&set, &path)?;
    let mut artifacts = vec![path];
    if s.csv {
        let path = out.join(format!("{}.csv", s.name));
        write_traceset_csv(&set, &path)?;
        artifacts.push(path);
    }
    Ok(Outcome {
        inputs: vec![],
        artifacts,
        summary: json!({
            "traces": set.count(),
            "trace_len": set.trace_len(),
            "sample_rate_hz": set.sample_rate_hz(),
        }),
    })
}

fn train_cmd(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let s = &mut cfg.train;
    let data_path = required(&s.data, "training data (train.data / --data)")?.to_path_buf();
    let raw = load_traceset(&data_path)?;
    let (data, scale) = if s.normalize { normalize_maxabs(&raw)? } else { (raw, 1.0) };
    let rng = Rng::new(cfg.seed);
    let mut inputs = vec![data_path];
    let model = match &s.resume {
        Some(ck) => {
            // the checkpoint's own config wins; only the epoch budget can grow
            let mut m = load_model(ck)?;
            if let Some(e) = s.model.as_ref().and_then(|t| t.get("epochs")).and_then(|v| v.as_integer()) {
                m.config.epochs = usize::try_from(e)
                    .map_err(|_| Error::InvalidConfig(format!("epochs must be >= 0, got {e}")))?;
            }
            inputs.push(ck.clone());
            m
        }
        None => {
            let c = s.resolve()?;
            check_len(c.trace_len(), &data, &inputs[0])?;
            build_model::<f32>(&c, data.sample_rate_hz(), &rng)?
        }
    };
    check_len(model.config.trace_len(), &data, &inputs[0])?;
    s.model = Some(table_of(&model.config)?);
    let start_epoch = model.epoch;
    let verbose = cfg.log_level == LogLevel::Debug;
    let (model, history) = train(
        model,
        &data,
        &rng,
        &TrainOutput {
            dir: Some(out.to_path_buf()),
            verbose,
        },
    )?;
    let mut artifacts = Vec::new();
    for name in ["last.ngck", "best.ngck", "train_log.csv"] {
        let p = out.join(name);
        if p.exists() {
            artifacts.push(p);
        }
    }
    Ok(Outcome {
        inputs,
        artifacts,
        summary: json!({
            "start_epoch": start_epoch,
            "epoch": model.epoch,
            "epochs_run": history.len(),
            "stopped_early": history.stopped_early,
            "initial_fid": history.initial_fid,
            "final_fid": history.final_fid(),
            "data_scale": scale,
            "params": model.param_count(),
        }),
    })
}

fn check_len(expected: usize, data: &TraceSet, path: &Path) -> Result<()> {
    if data.trace_len() == expected {
        return Ok(());
    }
    Err(Error::InvalidConfig(format!(
        "trace length mismatch: model expects {expected} samples, {} has {}",
        path.display(),
        data.trace_len()
    )))
}

fn generate_cmd(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let s = &cfg.generate;
    let ck = required(&s.checkpoint, "checkpoint (generate.checkpoint / --checkpoint)")?.to_path_buf();
    let model = load_model(&ck)?;
    let mut set = generate(&model, s.n_traces, &Rng::new(cfg.seed))?;
    if s.scale != 1.0 {
        let traces = set
            .traces()
            .iter()
            .map(|t| {
                let v: Vec<f64> = t.to_f64().iter().map(|x| x * s.scale).collect();
                NoiseTrace::from_f64(&v, t.sample_rate_hz())
            })
            .collect::<Result<Vec<_>>>()?;
        set = TraceSet::new(s.name.clone(), traces)?;
    }
    let set = set.with_name(s.name.clone());
    let path = out.join(format!("{}.ngts", s.name));
    save_traceset(&set, &path)?;
    Ok(Outcome {
        inputs: vec![ck],
        artifacts: vec![path],
        summary: json!({
            "traces": set.count(),
            "trace_len": set.trace_len(),
            "sample_rate_hz": set.sample_rate_hz(),
            "model_epoch": model.epoch,
        }),
    })
}

fn load_maybe_normalized(path: &Path, normalize: bool) -> Result<TraceSet> {
    let set = load_traceset(path)?;
    Ok(if normalize { normalize_maxabs(&set)?.0 } else { set })
}

fn evaluate_cmd(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let s = &mut cfg.evaluate;
    let a = required(&s.reference, "reference set (evaluate.reference / --reference)")?.to_path_buf();
    let b = required(&s.generated, "generated set (evaluate.generated / --generated)")?.to_path_buf();
    let metrics = resolve_metrics(s.preset.as_deref(), s.metrics.as_ref())?;
    s.metrics = Some(table_of(&metrics)?);
    let reference = load_maybe_normalized(&a, s.normalize)?;
    let generated = load_maybe_normalized(&b, s.normalize)?;
    let report = evaluate(&reference, &generated, &metrics)?;
    let artifacts = report.write_csv(out)?;
    Ok(Outcome {
        inputs: vec![a, b],
        artifacts,
        summary: json!({
            "fid": report.fid,
            "error_pct": report.exceedance.error_pct(),
            "threshold": metrics.threshold,
        }),
    })
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

/// 8-bit binary PGM, first row at the top. Values are scaled to the maximum.
fn write_pgm(path: &Path, rows: &[Vec<f64>]) -> Result<PathBuf> {
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    let peak = rows.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for r in rows {
        bytes.extend(r.iter().map(|v| if peak > 0.0 { (255.0 * v / peak).round() as u8 } else { 0 }));
    }
    fs::write(path, bytes)?;
    Ok(path.to_path_buf())
}

fn report_cmd(cfg: &mut RunConfig, out: &Path) -> Result<Outcome> {
    let s = &mut cfg.report;
    let data_path = required(&s.data, "trace set (report.data / --data)")?.to_path_buf();
    let metrics = resolve_metrics(s.preset.as_deref(), s.metrics.as_ref())?;
    s.metrics = Some(table_of(&metrics)?);
    let set = load_traceset(&data_path)?;
    let trace = set.traces().get(s.trace_index).ok_or_else(|| {
        Error::InvalidConfig(format!("trace_index {} out of range for {} traces", s.trace_index, set.count()))
    })?;
    let grid = metrics.grid(set.sample_rate_hz(), set.trace_len())?;
    let mut artifacts = Vec::new();

    let stats = feature_stats(&feature_table(&set, metrics.peak_thresh)?);
    let mut t = String::from("feature_id,feature,mean,std,median\n");
    for (i, f) in stats.iter().enumerate() {
        writeln!(t, "{},{},{},{},{}", i + 1, f.name, f.mean, f.std, f.median).unwrap();
    }
    artifacts.push(write_text(&out.join("features.csv"), &t)?);

    let pct = exceedance_stats(&set, &grid, metrics.threshold)?;
    let mut t = String::from("alpha,exceedance_pct\n");
    for (a, p) in grid.alphas.iter().zip(&pct) {
        writeln!(t, "{a} Hz,{p}").unwrap();
    }
    artifacts.push(write_text(&out.join("exceedance.csv"), &t)?);

    let bands = metrics.bands(grid.f_range);
    let dist = max_coeff_distribution(&set, grid.alphas[0], grid.nfft, &bands)?;
    let mut t = String::from("band_lo_hz,band_hi_hz,pct\n");
    for ((lo, hi), p) in bands.iter().zip(&dist) {
        writeln!(t, "{lo},{hi},{p}").unwrap();
    }
    artifacts.push(write_text(&out.join("bands.csv"), &t)?);

    let win = (set.trace_len() / 8).clamp(16, 256);
    let sg = spectrogram(trace, win, win / 2)?;
    let mut t = String::from("time_s,freq_hz,magnitude\n");
    for (ti, row) in sg.times.iter().zip(&sg.magnitude) {
        for (f, m) in sg.freqs.iter().zip(row) {
            writeln!(t, "{ti},{f},{m}").unwrap();
        }
    }
    artifacts.push(write_text(&out.join("spectrogram.csv"), &t)?);

    let mut alphas = vec![0.0];
    alphas.extend(&grid.alphas);
    let spec = csc(csd(trace, &alphas, grid.nfft)?);
    let coh = spec.csc.as_ref().expect("csc fills coherence");
    let mut t = String::from("alpha_hz,freq_hz,abs_csd,abs_csc\n");
    for (r, a) in spec.alphas.iter().enumerate() {
        for (k, f) in spec.freqs.iter().enumerate() {
            let c = if spec.valid[r][k] { coh[r][k].norm().to_string() } else { String::new() };
            writeln!(t, "{a},{f},{},{c}", spec.csd[r][k].norm()).unwrap();
        }
    }
    artifacts.push(write_text(&out.join("csc.csv"), &t)?);

    if s.plots {
        // frequency on the vertical axis, highest at the top
        let flip = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            let w = rows.first().map_or(0, Vec::len);
            (0..w).rev().map(|k| rows.iter().map(|r| r[k]).collect()).collect()
        };
        artifacts.push(write_pgm(&out.join("spectrogram.pgm"), &flip(&sg.magnitude))?);
        let mag: Vec<Vec<f64>> = coh.iter().map(|r| r.iter().map(|c| c.norm()).collect()).collect();
        artifacts.push(write_pgm(&out.join("csc.pgm"), &flip(&mag))?);
    }

    Ok(Outcome {
        inputs: vec![data_path],
        artifacts,
        summary: json!({
            "traces": set.count(),
            "nfft": grid.nfft,
            "threshold": metrics.threshold,
            "exceedance_pct": pct,
        }),
    })
}
