mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plcnoise::{Error, Result};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "plcnoise", version, about = "Synthesize, learn and evaluate power-line noise traces")]
struct Cli {
    /// TOML run config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 gives bitwise-reproducible output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Preset for the selected command.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a trace set from a parametric model.
    Synth(SynthArgs),
    /// Train the GAN on a trace set.
    Train(TrainArgs),
    /// Sample traces from a trained checkpoint.
    Generate(GenerateArgs),
    /// Compare a generated set with a reference set.
    Evaluate(EvaluateArgs),
    /// Characterize a single trace set.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Model family: fresh or pscgm.
    #[arg(long)]
    model: Option<String>,
    #[arg(short = 'n', long)]
    n_traces: Option<usize>,
    #[arg(long)]
    trace_len: Option<usize>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(short = 'n', long)]
    n_traces: Option<usize>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    scale: Option<f64>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    generated: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    normalize: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    plots: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Train(_) => "train",
            Command::Generate(_) => "generate",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
        }
    }
}

fn set_key(table: &mut Option<toml::Table>, key: &str, value: impl Into<toml::Value>) {
    table.get_or_insert_with(toml::Table::new).insert(key.into(), value.into());
}

/// Applies command-line flags on top of the loaded config.
fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let (cfg, command) = config::load(path)?;
            if let Some(c) = command.filter(|c| c != cli.command.name()) {
                return Err(Error::InvalidConfig(format!(
                    "manifest was written by `{c}`, not `{}`",
                    cli.command.name()
                )));
            }
            cfg
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    let preset = cli.preset.clone();
    match &cli.command {
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            if preset.is_some() {
                s.preset = preset;
            }
            if let Some(m) = &a.model {
                set_key(&mut s.model, "model", m.as_str());
            }
            s.n_traces = a.n_traces.unwrap_or(s.n_traces);
            s.trace_len = a.trace_len.or(s.trace_len);
            if let Some(n) = &a.name {
                s.name = n.clone();
            }
            s.csv |= a.csv;
        }
        Command::Train(a) => {
            let s = &mut cfg.train;
            if preset.is_some() {
                s.preset = preset;
            }
            s.data = a.data.clone().or(s.data.take());
            s.resume = a.resume.clone().or(s.resume.take());
            if let Some(e) = a.epochs {
                set_key(&mut s.model, "epochs", e as i64);
            }
        }
        Command::Generate(a) => {
            let s = &mut cfg.generate;
            s.checkpoint = a.checkpoint.clone().or(s.checkpoint.take());
            s.n_traces = a.n_traces.unwrap_or(s.n_traces);
            if let Some(n) = &a.name {
                s.name = n.clone();
            }
            s.scale = a.scale.unwrap_or(s.scale);
        }
        Command::Evaluate(a) => {
            let s = &mut cfg.evaluate;
            if preset.is_some() {
                s.preset = preset;
            }
            s.reference = a.reference.clone().or(s.reference.take());
            s.generated = a.generated.clone().or(s.generated.take());
            if let Some(t) = a.threshold {
                set_key(&mut s.metrics, "threshold", t);
            }
            s.normalize |= a.normalize;
        }
        Command::Report(a) => {
            let s = &mut cfg.report;
            if preset.is_some() {
                s.preset = preset;
            }
            s.data = a.data.clone().or(s.data.take());
            if let Some(t) = a.threshold {
                set_key(&mut s.metrics, "threshold", t);
            }
            s.plots |= a.plots;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = effective_config(cli)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    commands::run(cli.command.name(), &mut cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
