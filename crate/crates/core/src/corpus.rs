//! Deterministic synthetic speech for tests, demos and calibration.
//!
//! Words are rendered as harmonic voiced sounds: a pitch contour with
//! declination and light vibrato excites a vowel-dependent formant envelope,
//! shaped by attack and release ramps and separated by short pauses. The
//! result is not intelligible, but it has the properties the detector relies
//! on: harmonic word spectra, speaker-specific pitch, and silence between words.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio_io::{write_wav, AudioBuffer, WORKING_RATE};
use crate::error::Result;
use crate::evalharness::{DatasetManifest, ManifestEntry};
use crate::perturb::{make_labeled_pair, PerturbationSpec};
use crate::pipeline::tokenize;
use crate::segmentation::SegmentationConfig;

/// Timbre of a synthetic speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct Voice {
    pub f0_hz: f64,
    /// Formant frequencies are multiplied by this factor.
    pub formant_scale: f64,
    /// Vibrato depth as a fraction of f0.
    pub vibrato_depth: f64,
    pub vibrato_rate_hz: f64,
    /// Peak rise of the pitch inside each word, as a fraction of f0.
    pub contour_depth: f64,
    /// RMS of the background noise floor.
    pub noise_floor: f64,
}

impl Voice {
    pub fn new(f0_hz: f64) -> Self {
        Self { f0_hz, formant_scale: 1.0, vibrato_depth: 0.004, vibrato_rate_hz: 5.5, contour_depth: 0.01, noise_floor: 1e-4 }
    }

    pub fn with_formant_scale(mut self, scale: f64) -> Self {
        self.formant_scale = scale;
        self
    }
}

/// Five speakers spanning low male to high female pitch.
pub fn speakers() -> Vec<(String, Voice)> {
    [(105.0, 0.95), (125.0, 1.0), (165.0, 1.08), (205.0, 1.15), (235.0, 1.2)]
        .iter()
        .enumerate()
        .map(|(i, &(f0, scale))| (format!("spk{}", i + 1), Voice::new(f0).with_formant_scale(scale)))
        .collect()
}

/// The five evaluation sentences, each with the four word positions that
/// carry emphasis in the labeled set.
pub const SENTENCES: [(&str, [usize; 4]); 5] = [
    ("I did not take your bag.", [0, 3, 4, 5]),
    ("Hello, this is our intonation project.", [0, 1, 3, 4]),
    ("There are very few black rhinos left in Africa.", [3, 4, 6, 8]),
    ("I saw her face under the hood.", [0, 1, 3, 6]),
    ("Why did you give Sarah the sandwich with mustard.", [2, 4, 6, 8]),
];

/// A rendered utterance and the sample span of every word.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub audio: AudioBuffer,
    pub word_spans: Vec<(usize, usize)>,
}

const FORMANTS: [(char, [f64; 3]); 6] = [
    ('a', [730.0, 1090.0, 2440.0]),
    ('e', [530.0, 1840.0, 2480.0]),
    ('i', [390.0, 1990.0, 2550.0]),
    ('o', [570.0, 840.0, 2410.0]),
    ('u', [300.0, 870.0, 2240.0]),
    ('y', [270.0, 2290.0, 3010.0]),
];
const BANDWIDTHS: [f64; 3] = [90.0, 110.0, 140.0];

fn vowel_formants(token: &str) -> [f64; 3] {
    token
        .chars()
        .find_map(|c| FORMANTS.iter().find(|(v, _)| *v == c).map(|(_, f)| *f))
        .unwrap_or([500.0, 1500.0, 2500.0])
}

fn formant_gain(freq: f64, formants: &[f64; 3]) -> f64 {
    formants
        .iter()
        .zip(BANDWIDTHS)
        .map(|(&fc, bw)| fc * fc / ((fc * fc - freq * freq).powi(2) + (bw * freq).powi(2)).sqrt())
        .product()
}

/// Renders `tokens` in `voice`; `seed` controls durations, pauses and noise.
pub fn render_utterance(tokens: &[String], voice: &Voice, seed: u64) -> Rendered {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = WORKING_RATE as f64;
    let ms = |v: f64| (v * rate / 1000.0).round() as usize;

    let mut samples = vec![0.0; ms(rng.gen_range(150.0..250.0))];
    let mut word_spans = Vec::with_capacity(tokens.len());
    for (w, token) in tokens.iter().enumerate() {
        if w > 0 {
            samples.extend(std::iter::repeat_n(0.0, ms(rng.gen_range(130.0..230.0))));
        }
        let duration_ms = (170.0 + 45.0 * token.chars().count() as f64).clamp(220.0, 480.0) * rng.gen_range(0.92..1.08);
        let position = if tokens.len() > 1 { w as f64 / (tokens.len() - 1) as f64 } else { 0.5 };
        let f0 = voice.f0_hz * (1.06 - 0.12 * position) * rng.gen_range(0.98..1.02);
        let word = render_word(token, voice, f0, ms(duration_ms), rng.gen());
        let start = samples.len();
        samples.extend(word);
        word_spans.push((start, samples.len()));
    }
    samples.extend(std::iter::repeat_n(0.0, ms(rng.gen_range(200.0..300.0))));

    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let gain = if peak > 0.0 { 0.6 / peak } else { 1.0 };
    for s in samples.iter_mut() {
        *s = *s * gain + voice.noise_floor * gaussian(&mut rng);
    }
    Rendered { audio: AudioBuffer::new(samples, WORKING_RATE).expect("finite synthetic audio"), word_spans }
}

fn render_word(token: &str, voice: &Voice, f0: f64, len: usize, vibrato_phase: f64) -> Vec<f64> {
    let rate = WORKING_RATE as f64;
    let formants = vowel_formants(token).map(|f| f * voice.formant_scale);
    let harmonics = ((3900.0 / f0).floor() as usize).max(1);
    let gains: Vec<f64> = (1..=harmonics).map(|k| formant_gain(k as f64 * f0, &formants) / k as f64).collect();
    let attack = (0.025 * rate) as usize;
    let release = (0.04 * rate) as usize;

    let mut phase = 0.0;
    (0..len)
        .map(|i| {
            let t = i as f64 / rate;
            let progress = i as f64 / len as f64;
            // Gentle rise-fall within the word plus vibrato.
            let contour = 1.0 + voice.contour_depth * (PI * progress).sin();
            let vibrato = 1.0 + voice.vibrato_depth * (2.0 * PI * (voice.vibrato_rate_hz * t + vibrato_phase)).sin();
            phase += 2.0 * PI * f0 * contour * vibrato / rate;
            let voiced: f64 = gains.iter().enumerate().map(|(k, g)| g * ((k + 1) as f64 * phase).sin()).sum();
            let env = if i < attack {
                0.5 - 0.5 * (PI * i as f64 / attack as f64).cos()
            } else if len - i <= release {
                0.5 - 0.5 * (PI * (len - i) as f64 / release as f64).cos()
            } else {
                1.0
            };
            voiced * env
        })
        .collect()
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Options for [`write_fixture_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub pitch_delta_hz: f64,
    pub skew_deviation_hz: f64,
    pub skew_rate_hz: f64,
    pub seed: u64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self { pitch_delta_hz: 100.0, skew_deviation_hz: 120.0, skew_rate_hz: 6.0, seed: 1 }
    }
}

/// Writes a labeled fixture tree under `root` and returns its manifest path.
///
/// Layout: `<root>/<speaker>/<utterance>.ref.wav`, `.query.wav` and `.txt`,
/// plus `<root>/manifest.json`. Every speaker records every sentence once per
/// emphasized position; pitch and skew alternate between entries.
pub fn write_fixture_corpus(root: &Path, options: &CorpusOptions) -> Result<PathBuf> {
    let seg = SegmentationConfig::default();
    let mut entries = Vec::new();
    for (s, (speaker, voice)) in speakers().into_iter().enumerate() {
        let dir = root.join(&speaker);
        std::fs::create_dir_all(&dir)?;
        for (u, (text, emphasized)) in SENTENCES.iter().enumerate() {
            let tokens = tokenize(text);
            let reference = render_utterance(&tokens, &voice, options.seed ^ ((s * 31 + u) as u64) << 8).audio;
            for (e, &index) in emphasized.iter().enumerate() {
                let utterance = format!("s{}e{}", u + 1, index);
                let spec = if (s + u + e) % 2 == 0 {
                    PerturbationSpec::pitch(index, options.pitch_delta_hz)
                } else {
                    PerturbationSpec::skew(index, options.skew_deviation_hz, options.skew_rate_hz)
                };
                let (query, _) = make_labeled_pair(&reference, &tokens, &[spec], &seg)?;
                write_wav(&reference, dir.join(format!("{utterance}.ref.wav")))?;
                write_wav(&query, dir.join(format!("{utterance}.query.wav")))?;
                std::fs::write(dir.join(format!("{utterance}.txt")), format!("{text}\n"))?;
                entries.push(ManifestEntry {
                    speaker_id: speaker.clone(),
                    utterance_id: utterance.clone(),
                    query_path: format!("{speaker}/{utterance}.query.wav"),
                    reference_path: format!("{speaker}/{utterance}.ref.wav"),
                    transcript: text.to_string(),
                    emphasized_indices: vec![index],
                });
            }
        }
    }
    let manifest_path = root.join("manifest.json");
    DatasetManifest::new(entries).save(&manifest_path)?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::word_segments;

    #[test]
    fn rendering_is_deterministic() {
        let tokens = tokenize("I did not take your bag.");
        let a = render_utterance(&tokens, &Voice::new(140.0), 9);
        let b = render_utterance(&tokens, &Voice::new(140.0), 9);
        assert_eq!(a.audio, b.audio);
        assert_eq!(a.word_spans.len(), 6);
    }

    #[test]
    fn segmentation_finds_every_rendered_word() {
        for (_, voice) in speakers() {
            for (text, _) in SENTENCES {
                let tokens = tokenize(text);
                let r = render_utterance(&tokens, &voice, 3);
                let segs = word_segments(&r.audio, tokens.len(), &SegmentationConfig::default()).unwrap();
                for (seg, &(s, e)) in segs.iter().zip(&r.word_spans) {
                    assert!(seg.start_sample.abs_diff(s) < 800, "{text}: {} vs {s}", seg.start_sample);
                    assert!(seg.end_sample.abs_diff(e) < 800, "{text}: {} vs {e}", seg.end_sample);
                }
            }
        }
    }
}
