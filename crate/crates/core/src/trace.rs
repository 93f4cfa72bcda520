//! Noise traces, trace sets and their on-disk formats.
//!
//! # Binary trace file (`.ngts`)
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `b"NGTS"`               |
//! | 4      | 1    | version, `u8` = 1             |
//! | 5      | 4    | trace count, `u32`            |
//! | 9      | 4    | trace length, `u32`           |
//! | 13     | 8    | sample rate in Hz, `f64`      |
//! | 21     | 4·count·length | samples, `f32`, trace-major |
//!
//! The file must end exactly after the last sample.
//!
//! # CSV export
//!
//! One trace per line, samples separated by `,`, no header. Each value is
//! written with Rust's shortest round-trip `f32` formatting, so parsing the
//! text back as `f32` recovers the stored bits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NGTS";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 21;

/// One sampled noise waveform in volts.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    samples: Vec<f32>,
    sample_rate_hz: f64,
}

impl NoiseTrace {
    pub fn new(samples: Vec<f32>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Length("trace has no samples".into()));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidParam(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numerics(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Builds a trace from 64-bit values, rounding to storage precision.
    pub fn from_f64(samples: &[f64], sample_rate_hz: f64) -> Result<Self> {
        Self::new(samples.iter().map(|&x| x as f32).collect(), sample_rate_hz)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&x| x as f64).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// A non-empty collection of equal-length traces sharing one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    name: String,
    traces: Vec<NoiseTrace>,
}

impl TraceSet {
    pub fn new(name: impl Into<String>, traces: Vec<NoiseTrace>) -> Result<Self> {
        let first = traces
            .first()
            .ok_or_else(|| Error::Length("trace set needs at least one trace".into()))?;
        let (len, rate) = (first.len(), first.sample_rate_hz());
        for (i, t) in traces.iter().enumerate() {
            if t.len() != len {
                return Err(Error::Length(format!(
                    "trace {i} has {} samples, expected {len}",
                    t.len()
                )));
            }
            if t.sample_rate_hz() != rate {
                return Err(Error::InvalidParam(format!(
                    "trace {i} sample rate {} Hz differs from {rate} Hz",
                    t.sample_rate_hz()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            traces,
        })
    }

    /// Builds a set from row-major `count × length` samples.
    pub fn from_flat(
        name: impl Into<String>,
        flat: Vec<f32>,
        length: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if length == 0 || flat.len() % length != 0 {
            return Err(Error::Length(format!(
                "{} samples do not divide into traces of length {length}",
                flat.len()
            )));
        }
        let traces = flat
            .chunks(length)
            .map(|c| NoiseTrace::new(c.to_vec(), sample_rate_hz))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, traces)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn traces(&self) -> &[NoiseTrace] {
        &self.traces
    }

    pub fn count(&self) -> usize {
        self.traces.len()
    }

    pub fn trace_len(&self) -> usize {
        self.traces[0].len()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.traces[0].sample_rate_hz()
    }

    /// Traces `range` as a new set.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.count() {
            return Err(Error::Length(format!(
                "slice {range:?} invalid for {} traces",
                self.count()
            )));
        }
        Self::new(self.name.clone(), self.traces[range].to_vec())
    }

    pub fn max_abs(&self) -> f32 {
        self.traces
            .iter()
            .flat_map(|t| t.samples.iter())
            .fold(0.0f32, |m, &x| m.max(x.abs()))
    }
}

/// Divides every sample by the set-wide maximum magnitude.
///
/// Returns the normalized set and the scale; `normalized * scale` recovers
/// the input.
pub fn normalize_maxabs(set: &TraceSet) -> Result<(TraceSet, f32)> {
    let scale = set.max_abs();
    if scale == 0.0 {
        return Err(Error::DegenerateInput(
            "cannot normalize a set whose samples are all zero".into(),
        ));
    }
    let traces = set
        .traces
        .iter()
        .map(|t| NoiseTrace {
            samples: t.samples.iter().map(|&x| x / scale).collect(),
            sample_rate_hz: t.sample_rate_hz,
        })
        .collect();
    Ok((
        TraceSet {
            name: set.name.clone(),
            traces,
        },
        scale,
    ))
}

pub fn encode_traceset(set: &TraceSet) -> Result<Vec<u8>> {
    let count = u32::try_from(set.count())
        .map_err(|_| Error::Length("too many traces for the format".into()))?;
    let len = u32::try_from(set.trace_len())
        .map_err(|_| Error::Length("trace too long for the format".into()))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * set.count() * set.trace_len());
    buf.extend_from_slice(MAGIC);
    buf.push(FORMAT_VERSION);
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(&set.sample_rate_hz().to_le_bytes());
    for t in &set.traces {
        for s in &t.samples {
            buf.extend_from_slice(&s.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_traceset(name: impl Into<String>, bytes: &[u8]) -> Result<TraceSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "header truncated: expected {HEADER_LEN} bytes, found {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"NGTS\"",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {}, expected {FORMAT_VERSION}",
            bytes[4]
        )));
    }
    let count = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let len = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let rate = f64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let expected = count
        .checked_mul(len)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload size mismatch: expected {expected} bytes for {count}x{len} samples, found {}",
            payload.len()
        )));
    }
    let flat: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    TraceSet::from_flat(name, flat, len, rate).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_traceset(set: &TraceSet, path: &Path) -> Result<()> {
    fs::write(path, encode_traceset(set)?)?;
    Ok(())
}

/// Loads a trace file; the set is named after the file stem.
pub fn load_traceset(path: &Path) -> Result<TraceSet> {
    let bytes = fs::read(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_traceset(name, &bytes)
}

pub fn write_traceset_csv(set: &TraceSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for t in set.traces() {
        let mut first = true;
        for s in t.samples() {
            if !first {
                w.write_all(b",")?;
            }
            write!(w, "{s}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_gaussian, Rng};
    use proptest::prelude::*;

    fn random_set(seed: u64, count: usize, len: usize) -> TraceSet {
        let mut rng = Rng::new(seed);
        let flat: Vec<f32> = rng_gaussian(&mut rng, count * len, 0.0, 1.0)
            .unwrap()
            .into_iter()
            .map(|x| x as f32)
            .collect();
        TraceSet::from_flat("r", flat, len, 400_000.0).unwrap()
    }

    #[test]
    fn zero_trace_layout() {
        let set = TraceSet::new("z", vec![NoiseTrace::new(vec![0.0; 4], 1.0).unwrap()]).unwrap();
        let bytes = encode_traceset(&set).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 16);
        assert_eq!(decode_traceset("z", &bytes).unwrap(), set);
    }

    #[test]
    fn header_echo() {
        let set = TraceSet::from_flat("h", vec![0.5; 6], 3, 400_000.0).unwrap();
        let bytes = encode_traceset(&set).unwrap();
        assert_eq!(&bytes[0..4], b"NGTS");
        assert_eq!(bytes[4], 1);
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[9..13].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(bytes[13..21].try_into().unwrap()), 400_000.0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let a = NoiseTrace::new(vec![0.0; 4], 1.0).unwrap();
        let b = NoiseTrace::new(vec![0.0; 5], 1.0).unwrap();
        assert!(matches!(TraceSet::new("m", vec![a, b]), Err(Error::Length(_))));
    }

    #[test]
    fn invalid_traces_rejected() {
        assert!(NoiseTrace::new(vec![], 1.0).is_err());
        assert!(NoiseTrace::new(vec![1.0], 0.0).is_err());
        assert!(NoiseTrace::new(vec![f32::NAN], 1.0).is_err());
        assert!(TraceSet::new("e", vec![]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.ngts");
        let set = random_set(3, 8, 16);
        save_traceset(&set, &path).unwrap();
        let back = load_traceset(&path).unwrap();
        assert_eq!(back.traces(), set.traces());
        assert_eq!(back.name(), "set");
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_traceset(&random_set(1, 1, 4)).unwrap();
        bytes[0] = b'X';
        let err = decode_traceset("x", &bytes).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("magic")));
    }

    #[test]
    fn truncated_payload_reports_sizes() {
        let bytes = encode_traceset(&random_set(1, 2, 4)).unwrap();
        let err = decode_traceset("t", &bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            Error::Format(m) => assert!(m.contains("expected 32") && m.contains("found 29"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_examples() {
        let set = TraceSet::from_flat("n", vec![-2.0, 1.0], 2, 1.0).unwrap();
        let (norm, scale) = normalize_maxabs(&set).unwrap();
        assert_eq!(scale, 2.0);
        assert_eq!(norm.traces()[0].samples(), &[-1.0, 0.5]);

        let unit = TraceSet::from_flat("u", vec![0.25, -1.0, 0.5], 3, 1.0).unwrap();
        let (same, s) = normalize_maxabs(&unit).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(same, unit);

        let zero = TraceSet::from_flat("z", vec![0.0; 4], 2, 1.0).unwrap();
        assert!(matches!(normalize_maxabs(&zero), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn csv_export_round_trips_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.csv");
        let set = random_set(4, 3, 5);
        write_traceset_csv(&set, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let rows: Vec<Vec<f32>> = text
            .lines()
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 3);
        for (row, t) in rows.iter().zip(set.traces()) {
            assert_eq!(row.as_slice(), t.samples());
        }
    }

    proptest! {
        #[test]
        fn encode_decode_is_bit_exact(
            count in 1usize..5,
            len in 1usize..20,
            seed in any::<u64>(),
            rate in 1.0f64..1e7,
        ) {
            let mut rng = Rng::new(seed);
            let flat: Vec<f32> = (0..count * len)
                .map(|_| f32::from_bits(rng.next_u64() as u32 & 0xBF7F_FFFF))
                .collect();
            let set = TraceSet::from_flat("p", flat, len, rate).unwrap();
            let bytes = encode_traceset(&set).unwrap();
            prop_assert_eq!(encode_traceset(&decode_traceset("p", &bytes).unwrap()).unwrap(), bytes);
        }

        #[test]
        fn normalize_is_idempotent(seed in any::<u64>()) {
            let set = random_set(seed, 3, 7);
            let (once, scale) = normalize_maxabs(&set).unwrap();
            let (twice, scale2) = normalize_maxabs(&once).unwrap();
            prop_assert_eq!(scale2, 1.0);
            prop_assert_eq!(&once, &twice);
            for (a, b) in once.traces().iter().zip(set.traces()) {
                for (&x, &y) in a.samples().iter().zip(b.samples()) {
                    prop_assert!(((x * scale) - y).abs() <= 1e-6 * y.abs().max(1e-30));
                }
            }
        }
    }
}
