//! Side-by-side evaluation of a generated set against a reference set and
//! its CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cyclometrics::{
    basis_rows, exceedance_stats, feature_table, fid_in_space, matrix_from_rows,
    max_coeff_distribution, pca_fit, pca_project, CyclicGrid, FeatureVector, FidSpace,
    Standardizer, DEFAULT_PEAK_THRESH,
};
use crate::error::{Error, Result};
use crate::trace::TraceSet;

pub const DEFAULT_FUNDAMENTAL_HZ: f64 = 122.0;
const DEFAULT_MAX_FREQ_HZ: f64 = 200_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Coherence threshold of the exceedance table.
    pub threshold: f64,
    pub fundamental_hz: f64,
    /// α rows are `fundamental · 1..=harmonics`.
    pub harmonics: usize,
    /// Segment length; chosen from the fundamental when absent.
    pub nfft: Option<usize>,
    /// Analyzed spectral range `[lo, hi)`; defaults to 0–200 kHz capped at Nyquist.
    pub f_range_hz: Option<(f64, f64)>,
    /// Band edges for the argmax distribution; defaults to 8 equal bands.
    pub bands_hz: Option<Vec<(f64, f64)>>,
    pub peak_thresh: f64,
    pub fid_space: FidSpace,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            fundamental_hz: DEFAULT_FUNDAMENTAL_HZ,
            harmonics: 6,
            nfft: None,
            f_range_hz: None,
            bands_hz: None,
            peak_thresh: DEFAULT_PEAK_THRESH,
            fid_space: FidSpace::Standardized,
        }
    }
}

impl EvalConfig {
    pub fn alphas(&self) -> Vec<f64> {
        (1..=self.harmonics).map(|h| h as f64 * self.fundamental_hz).collect()
    }

    pub fn grid(&self, sample_rate_hz: f64, trace_len: usize) -> Result<CyclicGrid> {
        if self.harmonics == 0 || !(self.fundamental_hz > 0.0) {
            return Err(Error::InvalidConfig("need a positive fundamental and at least one harmonic".into()));
        }
        let nfft = match self.nfft {
            Some(n) => n,
            None => auto_nfft(sample_rate_hz, trace_len, self.fundamental_hz)?,
        };
        let f_range = self
            .f_range_hz
            .unwrap_or((0.0, DEFAULT_MAX_FREQ_HZ.min(sample_rate_hz / 2.0 + 1e-9)));
        Ok(CyclicGrid {
            alphas: self.alphas(),
            nfft,
            f_range,
        })
    }

    pub fn bands(&self, f_range: (f64, f64)) -> Vec<(f64, f64)> {
        self.bands_hz.clone().unwrap_or_else(|| {
            let w = (f_range.1 - f_range.0) / 8.0;
            (0..8).map(|i| (f_range.0 + i as f64 * w, f_range.0 + (i + 1) as f64 * w)).collect()
        })
    }
}

/// Shortest segment (a multiple of 64 samples) whose bin spacing resolves
/// `min_alpha`. Short segments maximize the number of averaged segments.
pub fn auto_nfft(sample_rate_hz: f64, trace_len: usize, min_alpha: f64) -> Result<usize> {
    let nfft = ((sample_rate_hz / min_alpha).ceil() as usize).div_ceil(64).max(1) * 64;
    if 2 * nfft > trace_len {
        return Err(Error::Resolution(format!(
            "resolving {min_alpha} Hz at {sample_rate_hz} Hz needs segments of {nfft} samples, \
             but traces of {trace_len} samples only fit segments up to {}",
            trace_len / 2
        )));
    }
    Ok(nfft)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStats {
    pub name: &'static str,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

pub fn feature_stats(features: &[FeatureVector]) -> Vec<FeatureStats> {
    let n = features.len() as f64;
    (0..FeatureVector::NAMES.len())
        .map(|j| {
            let mut col: Vec<f64> = features.iter().map(|f| f.values()[j]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = if col.len() > 1 {
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            col.sort_by(f64::total_cmp);
            let m = col.len() / 2;
            let median = if col.len() % 2 == 1 { col[m] } else { 0.5 * (col[m - 1] + col[m]) };
            FeatureStats {
                name: FeatureVector::NAMES[j],
                mean,
                std: var.sqrt(),
                median,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceTable {
    pub threshold: f64,
    pub alphas: Vec<f64>,
    pub reference_pct: Vec<f64>,
    pub generated_pct: Vec<f64>,
}

impl ExceedanceTable {
    /// `Σ_α |generated − reference|` in percentage points.
    pub fn error_pct(&self) -> f64 {
        self.reference_pct
            .iter()
            .zip(&self.generated_pct)
            .map(|(r, g)| (g - r).abs())
            .sum()
    }

    /// Generated exceedance as a percentage of the reference exceedance.
    pub fn ratio_to_reference(&self) -> Vec<Option<f64>> {
        self.reference_pct
            .iter()
            .zip(&self.generated_pct)
            .map(|(&r, &g)| (r > 0.0).then(|| 100.0 * g / r))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandTable {
    pub alpha: f64,
    pub bands: Vec<(f64, f64)>,
    pub reference_pct: Vec<f64>,
    pub generated_pct: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub reference_name: String,
    pub generated_name: String,
    pub reference_features: Vec<FeatureStats>,
    pub generated_features: Vec<FeatureStats>,
    pub exceedance: ExceedanceTable,
    pub bands: BandTable,
    pub fid_space: FidSpace,
    pub fid: f64,
    /// First two PCA scores of each set, in the reference standardization.
    pub pca_reference: Vec<[f64; 2]>,
    pub pca_generated: Vec<[f64; 2]>,
}

pub fn evaluate(reference: &TraceSet, generated: &TraceSet, cfg: &EvalConfig) -> Result<EvalReport> {
    if reference.sample_rate_hz() != generated.sample_rate_hz() || reference.trace_len() != generated.trace_len() {
        return Err(Error::Format(format!(
            "sets differ in shape: {} samples at {} Hz vs {} samples at {} Hz",
            reference.trace_len(),
            reference.sample_rate_hz(),
            generated.trace_len(),
            generated.sample_rate_hz()
        )));
    }
    let grid = cfg.grid(reference.sample_rate_hz(), reference.trace_len())?;
    let fa = feature_table(reference, cfg.peak_thresh)?;
    let fb = feature_table(generated, cfg.peak_thresh)?;
    let xa = matrix_from_rows(&basis_rows(&fa));
    let xb = matrix_from_rows(&basis_rows(&fb));
    let fid = fid_in_space(&xa, &xb, cfg.fid_space)?;

    let z = Standardizer::fit(&xa)?;
    let (za, zb) = (z.apply(&xa), z.apply(&xb));
    let pca = pca_fit(&za)?;
    let scores = |m| -> Result<Vec<[f64; 2]>> {
        let s = pca_project(&pca, m, 2)?;
        Ok((0..s.nrows()).map(|i| [s[(i, 0)], s[(i, 1)]]).collect())
    };

    let exceedance = ExceedanceTable {
        threshold: cfg.threshold,
        alphas: grid.alphas.clone(),
        reference_pct: exceedance_stats(reference, &grid, cfg.threshold)?,
        generated_pct: exceedance_stats(generated, &grid, cfg.threshold)?,
    };
    let bands = cfg.bands(grid.f_range);
    let alpha = grid.alphas[0];
    let band_table = BandTable {
        alpha,
        reference_pct: max_coeff_distribution(reference, alpha, grid.nfft, &bands)?,
        generated_pct: max_coeff_distribution(generated, alpha, grid.nfft, &bands)?,
        bands,
    };
    Ok(EvalReport {
        reference_name: reference.name().to_string(),
        generated_name: generated.name().to_string(),
        reference_features: feature_stats(&fa),
        generated_features: feature_stats(&fb),
        exceedance,
        bands: band_table,
        fid_space: cfg.fid_space,
        fid,
        pca_reference: scores(&za)?,
        pca_generated: scores(&zb)?,
    })
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Format(format!("csv: {other:?}")),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

impl EvalReport {
    /// Writes `features.csv`, `exceedance.csv`, `bands.csv`, `fid.csv` and
    /// `pca_scatter.csv` into `dir` and returns their paths.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();

        let path = dir.join("features.csv");
        let rows: Vec<Vec<String>> = self
            .reference_features
            .iter()
            .zip(&self.generated_features)
            .enumerate()
            .map(|(i, (a, b))| {
                vec![
                    (i + 1).to_string(),
                    a.name.to_string(),
                    a.mean.to_string(),
                    a.std.to_string(),
                    a.median.to_string(),
                    b.mean.to_string(),
                    b.std.to_string(),
                    b.median.to_string(),
                ]
            })
            .collect();
        write_rows(
            &path,
            &["feature_id", "feature", "ref_mean", "ref_std", "ref_median", "gen_mean", "gen_std", "gen_median"],
            &rows,
        )?;
        written.push(path);

        let path = dir.join("exceedance.csv");
        let t = &self.exceedance;
        let mut rows: Vec<Vec<String>> = t
            .alphas
            .iter()
            .zip(&t.reference_pct)
            .zip(&t.generated_pct)
            .zip(t.ratio_to_reference())
            .map(|(((a, r), g), q)| {
                vec![
                    format!("{a} Hz"),
                    r.to_string(),
                    g.to_string(),
                    q.map(|v| v.to_string()).unwrap_or_default(),
                ]
            })
            .collect();
        rows.push(vec!["Error".into(), String::new(), t.error_pct().to_string(), String::new()]);
        write_rows(
            &path,
            &["alpha", "reference_pct", "generated_pct", "ratio_to_reference_pct"],
            &rows,
        )?;
        written.push(path);

        let path = dir.join("bands.csv");
        let b = &self.bands;
        let rows: Vec<Vec<String>> = b
            .bands
            .iter()
            .zip(&b.reference_pct)
            .zip(&b.generated_pct)
            .map(|((band, r), g)| vec![band.0.to_string(), band.1.to_string(), r.to_string(), g.to_string()])
            .collect();
        write_rows(&path, &["band_lo_hz", "band_hi_hz", "reference_pct", "generated_pct"], &rows)?;
        written.push(path);

        let path = dir.join("fid.csv");
        let space = match self.fid_space {
            FidSpace::Standardized => "standardized",
            FidSpace::Pca => "pca",
        };
        write_rows(
            &path,
            &["reference", "generated", "space", "fid"],
            &[vec![
                self.reference_name.clone(),
                self.generated_name.clone(),
                space.into(),
                self.fid.to_string(),
            ]],
        )?;
        written.push(path);

        let path = dir.join("pca_scatter.csv");
        let rows: Vec<Vec<String>> = self
            .pca_reference
            .iter()
            .map(|p| ("reference", p))
            .chain(self.pca_generated.iter().map(|p| ("generated", p)))
            .map(|(s, p)| vec![s.to_string(), p[0].to_string(), p[1].to_string()])
            .collect();
        write_rows(&path, &["set", "pc1", "pc2"], &rows)?;
        written.push(path);
        Ok(written)
    }
}
