use plcnoise::rng::{rng_gaussian, rng_uniform};
use plcnoise::trace::{load_traceset, normalize_maxabs, save_traceset, HEADER_LEN};
use plcnoise::{Error, NoiseTrace, Rng, TraceSet};

fn random_set(seed: u64, count: usize, len: usize) -> TraceSet {
    let mut rng = Rng::new(seed);
    let traces = (0..count)
        .map(|_| NoiseTrace::from_f64(&rng_gaussian(&mut rng, len, 0.0, 0.5).unwrap(), 400e3).unwrap())
        .collect();
    TraceSet::new("random", traces).unwrap()
}

#[test]
fn file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.ngts");
    let set = random_set(1, 8, 16);
    save_traceset(&set, &path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, HEADER_LEN + 8 * 16 * 4);
    let back = load_traceset(&path).unwrap();
    assert_eq!(back.traces(), set.traces());
    assert_eq!(back.sample_rate_hz(), 400e3);
}

#[test]
fn truncated_file_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.ngts");
    save_traceset(&random_set(2, 2, 3), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(load_traceset(&path), Err(Error::Format(_))));
}

#[test]
fn normalization_examples() {
    let set = TraceSet::new("s", vec![NoiseTrace::new(vec![-2.0, 1.0], 1.0).unwrap()]).unwrap();
    let (n, scale) = normalize_maxabs(&set).unwrap();
    assert_eq!(n.traces()[0].samples(), &[-1.0, 0.5]);
    assert_eq!(scale, 2.0);
    let zero = TraceSet::new("z", vec![NoiseTrace::new(vec![0.0; 4], 1.0).unwrap()]).unwrap();
    assert!(matches!(normalize_maxabs(&zero), Err(Error::DegenerateInput(_))));
}

#[test]
fn million_sample_streams() {
    let g = rng_gaussian(&mut Rng::new(3), 1_000_000, 0.0, 1.0).unwrap();
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let m2 = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = g.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = g.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    assert!((m3 / m2.powf(1.5)).abs() <= 0.01);
    assert!((m4 / (m2 * m2) - 3.0).abs() <= 0.05);

    let u = rng_uniform(&mut Rng::new(7), 1_000_000, -1.0, 1.0).unwrap();
    assert!((u.iter().sum::<f64>() / 1e6).abs() <= 0.01);
    assert_eq!(u, rng_uniform(&mut Rng::new(7), 1_000_000, -1.0, 1.0).unwrap());
    assert!(matches!(rng_uniform(&mut Rng::new(7), 4, 1.0, 1.0), Err(Error::InvalidRange { .. })));
}
