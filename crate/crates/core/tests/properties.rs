use emphadet::audio_io::mix_to_mono;
use emphadet::{
    classify, condition, cross_correlate, detect_segments, magnitude_spectrum, normalize_energy, rms_envelope, AudioBuffer,
    ClassifierConfig, Confusion, CorrResult, EmphasisLabel, EvalMetrics, SegmentationConfig, Spectrum, WordSegment,
};
use proptest::prelude::*;

const RATE: u32 = 16_000;

fn whole(len: usize) -> WordSegment {
    WordSegment { start_sample: 0, end_sample: len, peak_rms: 0.0 }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    num / den
}

fn samples(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, min..max).prop_filter("non-silent", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn unit_spectrum(len: usize) -> impl Strategy<Value = Spectrum> {
    prop::collection::vec(0.0f64..1.0, len..=len)
        .prop_filter("non-zero", |v| v.iter().any(|&x| x > 1e-6))
        .prop_map(|m| normalize_energy(&Spectrum { magnitudes: m, df_hz: 5.0, f_lo_hz: 60.0 }).unwrap())
}

/// A buffer of sine bursts separated by silence, plus the burst spans.
fn bursts() -> impl Strategy<Value = (Vec<f64>, Vec<(usize, usize)>)> {
    let burst = (1600usize..4800, 1600usize..4000, 200.0f64..1000.0, 0.2f64..1.0);
    (800usize..3200, prop::collection::vec(burst, 1..4)).prop_map(|(lead, parts)| {
        let mut x = vec![0.0; lead];
        let mut spans = Vec::new();
        for (len, gap, freq, amp) in parts {
            let start = x.len();
            x.extend((0..len).map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / RATE as f64).sin()));
            spans.push((start, x.len()));
            x.extend(std::iter::repeat_n(0.0, gap));
        }
        (x, spans)
    })
}

/// Per-sample segmentation with no framing: a sample is speech when the RMS of
/// the hop-length neighbourhood centred on it reaches the relative threshold.
/// Runs are shrunk by half a neighbourhood on each side, which the centred
/// window adds to every edge.
fn naive_segments(x: &[f64], cfg: &SegmentationConfig) -> Vec<(usize, usize)> {
    let half = (cfg.hop_ms * RATE as f64 / 2000.0) as usize;
    let rms: Vec<f64> = (0..x.len())
        .map(|i| {
            let (a, b) = (i.saturating_sub(half), (i + half).min(x.len()));
            (x[a..b].iter().map(|v| v * v).sum::<f64>() / (b - a) as f64).sqrt()
        })
        .collect();
    let peak = rms.iter().copied().fold(0.0, f64::max);
    let min_gap = (cfg.min_gap_ms * RATE as f64 / 1000.0) as usize;
    let min_word = (cfg.min_word_ms * RATE as f64 / 1000.0) as usize;
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < x.len() {
        if rms[i] < cfg.relative_threshold * peak {
            i += 1;
            continue;
        }
        let start = i;
        while i < x.len() && rms[i] >= cfg.relative_threshold * peak {
            i += 1;
        }
        let (start, end) = (if start == 0 { 0 } else { start + half }, (i - half).max(start));
        match spans.last_mut() {
            Some(prev) if start < prev.1 + min_gap => prev.1 = end,
            _ => spans.push((start, end)),
        }
    }
    spans.retain(|(s, e)| e - s >= min_word);
    spans
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_holds(x in samples(64, 4000)) {
        let buf = AudioBuffer::new(x.clone(), RATE).unwrap();
        let s = magnitude_spectrum(&buf, &whole(x.len())).unwrap();
        let time: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((s.two_sided_energy() - time).abs() <= 1e-6 * time);
        prop_assert!((normalize_energy(&s).unwrap().energy() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn normalized_spectra_ignore_gain(x in samples(64, 3000), c in 0.01f64..50.0) {
        let a = AudioBuffer::new(x.clone(), RATE).unwrap();
        let seg = whole(x.len());
        let sa = normalize_energy(&magnitude_spectrum(&a, &seg).unwrap()).unwrap();
        let sb = normalize_energy(&magnitude_spectrum(&a.scaled(c), &seg).unwrap()).unwrap();
        prop_assert!(rel_diff(&sa.magnitudes, &sb.magnitudes) <= 1e-9);
    }

    #[test]
    fn circular_shift_keeps_magnitudes(x in prop::collection::vec(-1.0f64..1.0, 1024..=1024), k in 0usize..1024) {
        let mut shifted = x.clone();
        shifted.rotate_left(k);
        let seg = whole(1024);
        let a = magnitude_spectrum(&AudioBuffer::new(x, RATE).unwrap(), &seg).unwrap();
        let b = magnitude_spectrum(&AudioBuffer::new(shifted, RATE).unwrap(), &seg).unwrap();
        prop_assert!(rel_diff(&a.magnitudes, &b.magnitudes) <= 1e-9);
    }

    #[test]
    fn correlation_is_antisymmetric_and_bounded(a in unit_spectrum(300), b in unit_spectrum(300), max_lag in 0.0f64..800.0) {
        let ab = cross_correlate(&a, &b, max_lag).unwrap();
        let ba = cross_correlate(&b, &a, max_lag).unwrap();
        let n = ab.curve.len();
        for i in 0..n {
            prop_assert!((ab.curve[i] - ba.curve[n - 1 - i]).abs() <= 1e-9);
        }
        prop_assert!(ab.peak_value <= 1.0 + 1e-9);
        let aa = cross_correlate(&a, &a, max_lag).unwrap();
        prop_assert_eq!(aa.peak_lag_hz, 0.0);
        prop_assert!((aa.peak_value - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn thresholds_act_monotonically(
        lag in -500.0f64..500.0,
        peak in 0.0f64..1.0,
        pitch in 0.0f64..200.0,
        raise in 0.0f64..200.0,
        corr in 0.0f64..1.0,
        lower in 0.0f64..1.0,
    ) {
        let r = CorrResult { curve: vec![peak], lags_hz: vec![lag], peak_lag_hz: lag, peak_value: peak };
        let base = ClassifierConfig { pitch_threshold_hz: pitch, corr_threshold: corr, max_lag_hz: 500.0 };
        let before = classify(&r, &base);
        let raised = classify(&r, &ClassifierConfig { pitch_threshold_hz: pitch + raise, ..base });
        prop_assert!(!(before == EmphasisLabel::None && raised == EmphasisLabel::Pitch));
        let lowered = classify(&r, &ClassifierConfig { corr_threshold: corr * lower, ..base });
        prop_assert!(!(before != EmphasisLabel::Skew && lowered == EmphasisLabel::Skew));
    }

    #[test]
    fn condition_is_idempotent((x, _) in bursts(), tail in 0usize..4000) {
        let mut x = x;
        x.extend(std::iter::repeat_n(0.0, tail));
        let once = condition(&AudioBuffer::new(x, RATE).unwrap()).unwrap();
        let twice = condition(&once).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn segmentation_matches_per_sample_oracle((x, spans) in bursts(), c in 0.05f64..20.0) {
        let cfg = SegmentationConfig::default();
        let buf = AudioBuffer::new(x.clone(), RATE).unwrap();
        let segs = detect_segments(&rms_envelope(&buf, &cfg).unwrap(), &cfg).unwrap();
        let naive = naive_segments(&x, &cfg);
        prop_assert_eq!(segs.len(), naive.len());
        prop_assert_eq!(segs.len(), spans.len());
        for (s, (a, b)) in segs.iter().zip(&naive) {
            prop_assert!(s.start_sample.abs_diff(*a) <= 160, "start {} vs {}", s.start_sample, a);
            prop_assert!(s.end_sample.abs_diff(*b) <= 160, "end {} vs {}", s.end_sample, b);
        }
        for pair in segs.windows(2) {
            prop_assert!(pair[0].end_sample <= pair[1].start_sample);
        }
        let scaled = detect_segments(&rms_envelope(&buf.scaled(c), &cfg).unwrap(), &cfg).unwrap();
        let bounds = |v: &[WordSegment]| v.iter().map(|s| (s.start_sample, s.end_sample)).collect::<Vec<_>>();
        prop_assert_eq!(bounds(&segs), bounds(&scaled));
    }

    #[test]
    fn mixdown_is_linear(frames in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..200), a in -4.0f64..4.0) {
        let interleaved: Vec<f64> = frames.iter().flat_map(|&(l, r)| [l, r]).collect();
        let scaled: Vec<f64> = interleaved.iter().map(|v| a * v).collect();
        let lhs = mix_to_mono(&scaled, 2);
        let rhs: Vec<f64> = mix_to_mono(&interleaved, 2).iter().map(|v| a * v).collect();
        for (p, q) in lhs.iter().zip(&rhs) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn metrics_ignore_entry_order(labels in prop::collection::vec((any::<bool>(), any::<bool>()), 1..100), seed in any::<u64>()) {
        let mut shuffled = labels.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % (i as u64 + 1)) as usize);
        }
        let count = |v: &[(bool, bool)]| v.iter().fold(Confusion::default(), |mut c, &(t, p)| { c.record(t, p); c });
        let m = EvalMetrics::from_confusion(count(&labels));
        prop_assert_eq!(m, EvalMetrics::from_confusion(count(&shuffled)));
        let c = m.confusion;
        let p = if c.tp + c.fp > 0 { 100.0 * c.tp as f64 / (c.tp + c.fp) as f64 } else { 0.0 };
        let r = if c.tp + c.fn_ > 0 { 100.0 * c.tp as f64 / (c.tp + c.fn_) as f64 } else { 0.0 };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        prop_assert!((m.f1 - f1).abs() <= 0.01);
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }
}

#[test]
fn all_negative_predictions_give_prevalence_accuracy() {
    let truth = [true, false, false, true, false, false, false, false];
    let m = EvalMetrics::from_confusion(Confusion::from_labels(&truth, &[false; 8]));
    assert_eq!(m.recall, 0.0);
    assert_eq!(m.accuracy, 75.0);
}

#[test]
fn white_noise_reference_reads_as_skew() {
    use emphadet::compare_word;
    use emphadet::corpus::{render_utterance, Voice};
    use emphadet::perturb::word_segments;
    use emphadet::{tokenize, SpectralConfig};
    use rand::{Rng, SeedableRng};

    let tokens = tokenize("I did not take your bag.");
    let audio = render_utterance(&tokens, &Voice::new(140.0), 4).audio;
    let segs = word_segments(&audio, tokens.len(), &SegmentationConfig::default()).unwrap();
    let words: Vec<Spectrum> = segs.iter().map(|s| magnitude_spectrum(&audio, s).unwrap()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let (spectral, classifier) = (SpectralConfig::default(), ClassifierConfig::default());
    let mut failures = 0;
    for trial in 0..1000 {
        let word = &words[trial % words.len()];
        let noise: Vec<f64> = (0..word.len()).map(|_| rng.gen_range(-1.0f64..1.0).hypot(rng.gen_range(-1.0..1.0))).collect();
        let noise = normalize_energy(&Spectrum { magnitudes: noise, df_hz: word.df_hz, f_lo_hz: word.f_lo_hz }).unwrap();
        assert!(noise.len() >= 512);
        let (label, _) = compare_word(&noise, word, &spectral, &classifier).unwrap();
        if label != EmphasisLabel::Skew {
            failures += 1;
        }
    }
    assert!(failures < 10, "{failures} of 1000 trials were not Skew");
}
