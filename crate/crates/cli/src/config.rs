//! Run configuration: one TOML file with a section per command.
//!
//! Model and metric tables are layered over a preset, so a config only has
//! to name the fields it changes.

use std::fs;
use std::path::{Path, PathBuf};

use plcnoise::cyclometrics::EvalConfig;
use plcnoise::nggan::NgganConfig;
use plcnoise::synth::{presets, SynthModel};
use plcnoise::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SYNTH_PRESETS: [&str; 3] = ["dataset1-like", "dataset2-like", "desk"];
pub const TRAIN_PRESETS: [&str; 2] = ["default", "desk"];
pub const EVAL_PRESETS: [&str; 4] = ["dataset1-like", "dataset2-like", "measured", "desk"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Quiet,
    #[default]
    Info,
    Debug,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub log_level: LogLevel,
    pub synth: SynthSection,
    pub train: TrainSection,
    pub generate: GenerateSection,
    pub evaluate: EvaluateSection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub preset: Option<String>,
    /// Generator fields layered over the preset; `model = "..."` picks the family.
    pub model: Option<toml::Table>,
    pub n_traces: usize,
    pub trace_len: Option<usize>,
    pub name: String,
    /// Also write the traces as CSV.
    pub csv: bool,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            preset: None,
            model: None,
            n_traces: 100,
            trace_len: None,
            name: "synth".into(),
            csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub data: Option<PathBuf>,
    pub preset: Option<String>,
    pub model: Option<toml::Table>,
    /// Continue from this checkpoint instead of a fresh model.
    pub resume: Option<PathBuf>,
    /// Divide the data by its largest magnitude before training.
    pub normalize: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            data: None,
            preset: None,
            model: None,
            resume: None,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub checkpoint: Option<PathBuf>,
    pub n_traces: usize,
    pub name: String,
    /// Multiplies generated samples, e.g. to undo training normalization.
    pub scale: f64,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            checkpoint: None,
            n_traces: 100,
            name: "generated".into(),
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub reference: Option<PathBuf>,
    pub generated: Option<PathBuf>,
    pub preset: Option<String>,
    pub metrics: Option<toml::Table>,
    /// Max-abs normalize both sets before comparing.
    pub normalize: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub data: Option<PathBuf>,
    pub preset: Option<String>,
    pub metrics: Option<toml::Table>,
    /// Trace used for the spectrogram and cyclic coherence maps.
    pub trace_index: usize,
    /// Also write grayscale PGM images of those maps.
    pub plots: bool,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn unknown(kind: &str, name: &str, valid: &[&str]) -> Error {
    config_err(format!("unknown {kind} '{name}'; valid {kind}s: {}", valid.join(", ")))
}

/// Reads a TOML run config, or the config snapshot inside a JSON manifest.
pub fn load(path: &Path) -> Result<(RunConfig, Option<String>)> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: crate::manifest::Manifest =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        return Ok((m.config, Some(m.command)));
    }
    let cfg = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    Ok((cfg, None))
}

/// Deserializes `base` with the keys of `overlay` replacing its own.
fn layered<T: Serialize + DeserializeOwned>(base: &T, overlay: Option<&toml::Table>) -> Result<T> {
    let mut table = toml::Table::try_from(base).map_err(|e| config_err(e.to_string()))?;
    if let Some(o) = overlay {
        for (k, v) in o {
            table.insert(k.clone(), v.clone());
        }
    }
    table.try_into().map_err(|e: toml::de::Error| config_err(e.to_string()))
}

fn preset_model(family: &str) -> Result<SynthModel> {
    match family {
        "fresh" => Ok(SynthModel::Fresh(presets::dataset2_like())),
        "pscgm" => Ok(SynthModel::Pscgm(presets::dataset1_like())),
        other => Err(unknown("model", other, &SynthModel::NAMES)),
    }
}

impl SynthSection {
    /// Generator and trace length after applying preset and overrides.
    pub fn resolve(&self) -> Result<(SynthModel, usize)> {
        let preset = self.preset.as_deref().unwrap_or("dataset2-like");
        let (base, len) = match preset {
            "dataset1-like" => (SynthModel::Pscgm(presets::dataset1_like()), presets::FULL_TRACE_LEN),
            "dataset2-like" => (SynthModel::Fresh(presets::dataset2_like()), presets::FULL_TRACE_LEN),
            "desk" => (SynthModel::Fresh(presets::dataset2_desk()), presets::DESK_TRACE_LEN),
            other => return Err(unknown("preset", other, &SYNTH_PRESETS)),
        };
        let base = match self.model.as_ref().and_then(|t| t.get("model")) {
            Some(toml::Value::String(family)) => {
                let family_of_base = match &base {
                    SynthModel::Fresh(_) => "fresh",
                    SynthModel::Pscgm(_) => "pscgm",
                };
                if family == family_of_base {
                    base
                } else {
                    preset_model(family)?
                }
            }
            Some(other) => return Err(config_err(format!("model must be a string, got {other}"))),
            None => base,
        };
        let model = layered(&base, self.model.as_ref())?;
        Ok((model, self.trace_len.unwrap_or(len)))
    }
}

impl TrainSection {
    pub fn resolve(&self) -> Result<NgganConfig> {
        let base = match self.preset.as_deref().unwrap_or("default") {
            "default" => NgganConfig::default(),
            "desk" => NgganConfig::desk(),
            other => return Err(unknown("preset", other, &TRAIN_PRESETS)),
        };
        let cfg: NgganConfig = layered(&base, self.model.as_ref())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exceedance threshold per data preset.
pub fn preset_threshold(preset: &str) -> Result<f64> {
    match preset {
        "dataset1-like" => Ok(0.9),
        "dataset2-like" | "desk" => Ok(0.5),
        "measured" => Ok(0.3),
        other => Err(unknown("preset", other, &EVAL_PRESETS)),
    }
}

pub fn resolve_metrics(preset: Option<&str>, metrics: Option<&toml::Table>) -> Result<EvalConfig> {
    let base = EvalConfig {
        threshold: preset_threshold(preset.unwrap_or("dataset2-like"))?,
        ..EvalConfig::default()
    };
    layered(&base, metrics)
}

pub fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| config_err(format!("missing {what}; pass it as a flag or set it in the config")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_keeps_preset_fields() {
        let t: toml::Table = toml::from_str("epochs = 3").unwrap();
        let s = TrainSection {
            preset: Some("desk".into()),
            model: Some(t),
            ..Default::default()
        };
        let c = s.resolve().unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.blocks, 3);
    }

    #[test]
    fn switching_family_starts_from_its_preset() {
        let t: toml::Table = toml::from_str("model = \"pscgm\"").unwrap();
        let s = SynthSection {
            model: Some(t),
            ..Default::default()
        };
        assert!(matches!(s.resolve().unwrap().0, SynthModel::Pscgm(_)));
    }

    #[test]
    fn unknown_names_list_choices() {
        let t: toml::Table = toml::from_str("model = \"arma\"").unwrap();
        let s = SynthSection {
            model: Some(t),
            ..Default::default()
        };
        let msg = s.resolve().unwrap_err().to_string();
        assert!(msg.contains("fresh") && msg.contains("pscgm"), "{msg}");
        assert!(preset_threshold("dataset3").is_err());
    }

    #[test]
    fn thresholds_follow_preset() {
        assert_eq!(resolve_metrics(Some("dataset1-like"), None).unwrap().threshold, 0.9);
        assert_eq!(resolve_metrics(Some("measured"), None).unwrap().threshold, 0.3);
        assert_eq!(resolve_metrics(None, None).unwrap().threshold, 0.5);
    }
}
