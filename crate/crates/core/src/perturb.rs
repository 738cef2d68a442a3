//! Synthetic emphasis: controlled pitch shifts and frequency smearing applied
//! to single words of a clean utterance, with the ground-truth labels that go
//! with them.
//!
//! Both perturbations work on the analytic signal of the word: a constant
//! phase ramp translates the whole spectrum rigidly (pitch), a sinusoidal
//! phase wobble spreads every component over `±deviation_hz` (skew).

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::comparator::EmphasisLabel;
use crate::error::{Error, Result};
use crate::segmentation::{align_to_token_count, detect_segments, rms_envelope, SegmentationConfig, WordSegment};

pub const DEFAULT_CROSSFADE_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    PitchShift { delta_hz: f64 },
    Skew { deviation_hz: f64, rate_hz: f64 },
}

impl PerturbationKind {
    pub fn label(&self) -> EmphasisLabel {
        match self {
            PerturbationKind::PitchShift { .. } => EmphasisLabel::Pitch,
            PerturbationKind::Skew { .. } => EmphasisLabel::Skew,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PerturbationKind::PitchShift { delta_hz } => {
                if delta_hz == 0.0 || !delta_hz.is_finite() || delta_hz.abs() >= 1000.0 {
                    return Err(Error::InvalidPerturbation(format!(
                        "pitch shift must be non-zero and below 1000 Hz in magnitude, got {delta_hz}"
                    )));
                }
            }
            PerturbationKind::Skew { deviation_hz, rate_hz } => {
                if !(deviation_hz > 0.0 && deviation_hz.is_finite() && rate_hz > 0.0 && rate_hz.is_finite()) {
                    return Err(Error::InvalidPerturbation(format!(
                        "skew needs positive deviation and rate, got {deviation_hz} Hz at {rate_hz} Hz"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub word_index: usize,
    #[serde(flatten)]
    pub kind: PerturbationKind,
    #[serde(default = "default_crossfade")]
    pub crossfade_ms: f64,
}

fn default_crossfade() -> f64 {
    DEFAULT_CROSSFADE_MS
}

impl PerturbationSpec {
    pub fn pitch(word_index: usize, delta_hz: f64) -> Self {
        Self { word_index, kind: PerturbationKind::PitchShift { delta_hz }, crossfade_ms: DEFAULT_CROSSFADE_MS }
    }

    pub fn skew(word_index: usize, deviation_hz: f64, rate_hz: f64) -> Self {
        Self { word_index, kind: PerturbationKind::Skew { deviation_hz, rate_hz }, crossfade_ms: DEFAULT_CROSSFADE_MS }
    }
}

/// Translates every frequency in the word by `delta_hz` (single-sideband shift).
pub fn pitch_shift_word(buffer: &AudioBuffer, segment: &WordSegment, delta_hz: f64) -> Result<AudioBuffer> {
    apply(buffer, segment, &PerturbationKind::PitchShift { delta_hz }, DEFAULT_CROSSFADE_MS)
}

/// Frequency-modulates the word: its instantaneous offset swings between
/// `±deviation_hz`, `rate_hz` times per second.
pub fn skew_word(buffer: &AudioBuffer, segment: &WordSegment, deviation_hz: f64, rate_hz: f64) -> Result<AudioBuffer> {
    apply(buffer, segment, &PerturbationKind::Skew { deviation_hz, rate_hz }, DEFAULT_CROSSFADE_MS)
}

pub fn apply(buffer: &AudioBuffer, segment: &WordSegment, kind: &PerturbationKind, crossfade_ms: f64) -> Result<AudioBuffer> {
    kind.validate()?;
    if segment.is_empty() || segment.end_sample > buffer.len() {
        return Err(Error::SegmentOutOfBounds { start: segment.start_sample, end: segment.end_sample, len: buffer.len() });
    }
    if !(crossfade_ms >= 0.0 && crossfade_ms.is_finite()) {
        return Err(Error::InvalidPerturbation(format!("crossfade must be non-negative, got {crossfade_ms}")));
    }
    let rate = buffer.sample_rate() as f64;
    let phase: Box<dyn Fn(f64) -> f64> = match *kind {
        PerturbationKind::PitchShift { delta_hz } => Box::new(move |t| 2.0 * PI * delta_hz * t),
        PerturbationKind::Skew { deviation_hz, rate_hz } => {
            Box::new(move |t| deviation_hz / rate_hz * (2.0 * PI * rate_hz * t).sin())
        }
    };

    let original = &buffer.samples()[segment.start_sample..segment.end_sample];
    let analytic = analytic_signal(original);
    let n = original.len();
    let fade = ((crossfade_ms * rate / 1000.0).round() as usize).min(n / 2);
    let mut samples = buffer.samples().to_vec();
    for (i, (z, &x)) in analytic.iter().zip(original).enumerate() {
        let rotated = *z * Complex::from_polar(1.0, phase(i as f64 / rate));
        let w = edge_weight(i, n, fade);
        samples[segment.start_sample + i] = w * rotated.re + (1.0 - w) * x;
    }
    AudioBuffer::new(samples, buffer.sample_rate())
}

/// Raised-cosine ramp from the original (0) to the perturbed signal (1).
fn edge_weight(i: usize, n: usize, fade: usize) -> f64 {
    if fade == 0 {
        return 1.0;
    }
    let distance = i.min(n - 1 - i);
    if distance >= fade {
        1.0
    } else {
        0.5 - 0.5 * (PI * (distance as f64 + 0.5) / fade as f64).cos()
    }
}

/// Analytic signal via a zero-padded FFT with the negative half suppressed.
pub(crate) fn analytic_signal(x: &[f64]) -> Vec<Complex<f64>> {
    let n = x.len();
    let m = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let mut bins: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    bins.resize(m, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(m).process(&mut bins);
    for (k, b) in bins.iter_mut().enumerate() {
        if k == 0 || k == m / 2 {
            continue;
        }
        if k < m / 2 {
            *b *= 2.0;
        } else {
            *b = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(m).process(&mut bins);
    let scale = 1.0 / m as f64;
    bins.truncate(n);
    bins.iter_mut().for_each(|b| *b *= scale);
    bins
}

/// Segments `reference` into `tokens.len()` words and applies each spec to
/// its word. When several specs target the same word only the last one is
/// applied.
pub fn make_labeled_pair(
    reference: &AudioBuffer,
    tokens: &[String],
    specs: &[PerturbationSpec],
    seg_config: &SegmentationConfig,
) -> Result<(AudioBuffer, Vec<EmphasisLabel>)> {
    let segments = word_segments(reference, tokens.len(), seg_config)?;
    let mut chosen: Vec<Option<&PerturbationSpec>> = vec![None; segments.len()];
    for spec in specs {
        let slot = chosen.get_mut(spec.word_index).ok_or_else(|| {
            Error::InvalidPerturbation(format!("word index {} outside {} words", spec.word_index, tokens.len()))
        })?;
        *slot = Some(spec);
    }
    let mut query = reference.clone();
    let mut labels = vec![EmphasisLabel::None; segments.len()];
    for (i, spec) in chosen.iter().enumerate() {
        if let Some(spec) = spec {
            query = apply(&query, &segments[i], &spec.kind, spec.crossfade_ms)?;
            labels[i] = spec.kind.label();
        }
    }
    Ok((query, labels))
}

/// Word segments of `buffer` aligned to exactly `k` words.
pub fn word_segments(buffer: &AudioBuffer, k: usize, seg_config: &SegmentationConfig) -> Result<Vec<WordSegment>> {
    let envelope = rms_envelope(buffer, seg_config)?;
    let detected = detect_segments(&envelope, seg_config)?;
    align_to_token_count(&detected, &envelope, k)
}
