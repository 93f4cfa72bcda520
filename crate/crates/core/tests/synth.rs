use plcnoise::cyclometrics::{csc, csd};
use plcnoise::synth::{gen_fresh, gen_pscgm, presets, SynthModel};
use plcnoise::{Error, Rng};
use rayon::prelude::*;

/// Mean |coherence| over valid bins, averaged over traces, for each α.
fn mean_coherence(set: &plcnoise::TraceSet, alphas: &[f64], nfft: usize) -> Vec<f64> {
    let per_trace: Vec<Vec<f64>> = set
        .traces()
        .par_iter()
        .map(|t| {
            let spec = csc(csd(t, alphas, nfft).unwrap());
            let c = spec.csc.as_ref().unwrap();
            (0..alphas.len())
                .map(|r| {
                    let vals: Vec<f64> =
                        (0..spec.freqs.len()).filter(|&k| spec.valid[r][k]).map(|k| c[r][k].norm()).collect();
                    vals.iter().sum::<f64>() / vals.len() as f64
                })
                .collect()
        })
        .collect();
    (0..alphas.len())
        .map(|r| per_trace.iter().map(|p| p[r]).sum::<f64>() / per_trace.len() as f64)
        .collect()
}

#[test]
fn dominant_cyclic_frequency_is_the_configured_cycle() {
    let cfg = presets::dataset2_desk();
    let set = gen_fresh(&cfg, 2048, presets::DESK_TRACE_LEN, &Rng::new(21)).unwrap();
    let nfft = 256;
    let bin = cfg.sample_rate_hz / nfft as f64;
    // every resolvable α up to past the third harmonic
    let alphas: Vec<f64> = (0..70).map(|i| bin.ceil() + 4.0 * i as f64).collect();
    let score = mean_coherence(&set, &alphas, nfft);
    let best = alphas[score.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
    assert!((best - presets::CYCLE_HZ).abs() <= bin, "dominant α {best} Hz");
}

#[test]
fn presets_produce_documented_shapes() {
    let d2 = SynthModel::Fresh(presets::dataset2_like());
    let set = d2.generate(3, presets::FULL_TRACE_LEN, &Rng::new(1)).unwrap();
    assert_eq!((set.count(), set.trace_len(), set.sample_rate_hz()), (3, 16384, 400_000.0));
    let cycles = set.trace_len() as f64 / set.sample_rate_hz() * d2.cycle_hz();
    assert!((cycles - 5.0).abs() < 0.05, "{cycles}");

    let d1 = gen_pscgm(&presets::dataset1_like(), 2, presets::FULL_TRACE_LEN, &Rng::new(1)).unwrap();
    assert_eq!(d1.trace_len(), 16384);
    assert!(d1.max_abs() > 0.0);
}

#[test]
fn pscgm_region_sum_is_checked() {
    let mut cfg = presets::dataset1_like();
    cfg.regions[0].duration_s *= 0.5;
    assert!(matches!(gen_pscgm(&cfg, 1, 16384, &Rng::new(1)), Err(Error::InvalidConfig(_))));
}

#[test]
fn generation_is_seeded() {
    let cfg = presets::dataset2_desk();
    let a = gen_fresh(&cfg, 4, 1024, &Rng::new(5)).unwrap();
    let b = gen_fresh(&cfg, 4, 1024, &Rng::new(5)).unwrap();
    let c = gen_fresh(&cfg, 4, 1024, &Rng::new(6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
