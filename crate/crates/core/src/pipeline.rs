//! End-to-end comparison of a query utterance against its neutral reference.

use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::comparator::{compare_word_detailed, CorrResult, EmphasisLabel};
use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::segmentation::{align_to_token_count, detect_segments, rms_envelope, WordSegment};
use crate::spectral::{magnitude_spectrum, Spectrum};

pub const REPORT_VERSION: u32 = 1;

/// Splits a transcript on whitespace, strips punctuation and lowercases.
/// Apostrophes inside a word survive ("don't").
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            let kept: String = raw.chars().filter(|c| c.is_alphanumeric() || *c == '\'').collect();
            kept.trim_matches('\'').to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordResult {
    pub index: usize,
    pub token: String,
    pub label: EmphasisLabel,
    pub peak_lag_hz: f64,
    pub peak_value: f64,
    /// `[start, end)` in query samples.
    pub query_span: [usize; 2],
    /// `[start, end)` in reference samples.
    pub reference_span: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub version: u32,
    pub transcript: Vec<String>,
    pub words: Vec<WordResult>,
    pub config_used: AnalysisConfig,
    /// True when either side's detected word count had to be merged or split
    /// to match the transcript.
    pub alignment_adjusted: bool,
}

impl AnalysisReport {
    pub fn emphasized_indices(&self) -> Vec<usize> {
        self.words.iter().filter(|w| w.label.is_emphasized()).map(|w| w.index).collect()
    }

    pub fn labels(&self) -> Vec<EmphasisLabel> {
        self.words.iter().map(|w| w.label).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Transcript with emphasized words bracketed, e.g. `i did not [take] your bag`.
    pub fn marked_transcript(&self) -> String {
        self.words
            .iter()
            .map(|w| match w.label {
                EmphasisLabel::None => w.token.clone(),
                _ => format!("[{}]", w.token),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Plot material for one word: both spectra on the comparison grid and the
/// correlation between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordEvidence {
    pub index: usize,
    pub query_spectrum: Spectrum,
    pub reference_spectrum: Spectrum,
    pub correlation: CorrResult,
}

pub fn analyze(query: &AudioBuffer, reference: &AudioBuffer, tokens: &[String], config: &AnalysisConfig) -> Result<AnalysisReport> {
    analyze_with_evidence(query, reference, tokens, config).map(|(report, _)| report)
}

/// Segments both buffers into `tokens.len()` words, compares word `i` of the
/// query with word `i` of the reference, and collects verdicts plus evidence.
pub fn analyze_with_evidence(
    query: &AudioBuffer,
    reference: &AudioBuffer,
    tokens: &[String],
    config: &AnalysisConfig,
) -> Result<(AnalysisReport, Vec<WordEvidence>)> {
    config.validate()?;
    if tokens.is_empty() {
        return Err(Error::InvalidConfig("transcript has no tokens".into()));
    }
    if query.sample_rate() != reference.sample_rate() {
        return Err(Error::InvalidBuffer(format!(
            "query at {} Hz but reference at {} Hz",
            query.sample_rate(),
            reference.sample_rate()
        )));
    }
    let (query_words, query_adjusted) = words(query, tokens.len(), config)?;
    let (reference_words, reference_adjusted) = words(reference, tokens.len(), config)?;

    let mut results = Vec::with_capacity(tokens.len());
    let mut evidence = Vec::with_capacity(tokens.len());
    for (index, ((token, q), r)) in tokens.iter().zip(&query_words).zip(&reference_words).enumerate() {
        let query_spectrum = magnitude_spectrum(query, q)?;
        let reference_spectrum = magnitude_spectrum(reference, r)?;
        let cmp = compare_word_detailed(&query_spectrum, &reference_spectrum, &config.spectral, &config.classifier)?;
        results.push(WordResult {
            index,
            token: token.clone(),
            label: cmp.label,
            peak_lag_hz: cmp.correlation.peak_lag_hz,
            peak_value: cmp.correlation.peak_value,
            query_span: [q.start_sample, q.end_sample],
            reference_span: [r.start_sample, r.end_sample],
        });
        evidence.push(WordEvidence {
            index,
            query_spectrum: cmp.query,
            reference_spectrum: cmp.reference,
            correlation: cmp.correlation,
        });
    }
    let report = AnalysisReport {
        version: REPORT_VERSION,
        transcript: tokens.to_vec(),
        words: results,
        config_used: *config,
        alignment_adjusted: query_adjusted || reference_adjusted,
    };
    Ok((report, evidence))
}

fn words(buffer: &AudioBuffer, k: usize, config: &AnalysisConfig) -> Result<(Vec<WordSegment>, bool)> {
    let envelope = rms_envelope(buffer, &config.segmentation)?;
    let detected = detect_segments(&envelope, &config.segmentation)?;
    if detected.is_empty() {
        return Err(Error::NoSpeech);
    }
    let adjusted = detected.len() != k;
    Ok((align_to_token_count(&detected, &envelope, k)?, adjusted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{render_utterance, Voice};
    use crate::perturb::{make_labeled_pair, PerturbationSpec};

    #[test]
    fn tokenization() {
        assert_eq!(tokenize("I did not take your bag."), ["i", "did", "not", "take", "your", "bag"]);
        assert_eq!(tokenize("  Hello,   WORLD!! "), ["hello", "world"]);
        assert_eq!(tokenize("don't 'quote' -- ..."), ["don't", "quote"]);
        assert!(tokenize(" .,; ").is_empty());
    }

    fn sentence() -> (Vec<String>, AudioBuffer) {
        let tokens = tokenize("I did not take your bag.");
        let audio = render_utterance(&tokens, &Voice::new(150.0), 11).audio;
        (tokens, audio)
    }

    #[test]
    fn self_comparison_is_all_none() {
        let (tokens, audio) = sentence();
        let report = analyze(&audio, &audio, &tokens, &AnalysisConfig::default()).unwrap();
        assert_eq!(report.words.len(), 6);
        assert!(report.emphasized_indices().is_empty());
        assert!(!report.alignment_adjusted);
        for w in &report.words {
            assert_eq!(w.peak_lag_hz, 0.0);
            assert!((w.peak_value - 1.0).abs() < 1e-9);
        }
        assert_eq!(report.marked_transcript(), "i did not take your bag");
    }

    #[test]
    fn pitch_shifted_word_is_flagged() {
        let (tokens, audio) = sentence();
        let cfg = AnalysisConfig::default();
        let (query, _) = make_labeled_pair(&audio, &tokens, &[PerturbationSpec::pitch(3, 100.0)], &cfg.segmentation).unwrap();
        let report = analyze(&query, &audio, &tokens, &cfg).unwrap();
        assert_eq!(report.labels()[3], EmphasisLabel::Pitch);
        assert_eq!(report.emphasized_indices(), vec![3]);
        assert!((report.words[3].peak_lag_hz - 100.0).abs() <= 10.0, "{}", report.words[3].peak_lag_hz);
        assert_eq!(report.marked_transcript(), "i did not [take] your bag");
    }

    #[test]
    fn skewed_word_is_flagged() {
        let (tokens, audio) = sentence();
        let cfg = AnalysisConfig::default();
        let (query, _) = make_labeled_pair(&audio, &tokens, &[PerturbationSpec::skew(2, 120.0, 6.0)], &cfg.segmentation).unwrap();
        let report = analyze(&query, &audio, &tokens, &cfg).unwrap();
        assert_eq!(report.labels()[2], EmphasisLabel::Skew, "{report:#?}");
        assert_eq!(report.emphasized_indices(), vec![2]);
    }

    #[test]
    fn silent_input_reports_no_speech() {
        let (tokens, audio) = sentence();
        let silence = AudioBuffer::new(vec![0.0; audio.len()], audio.sample_rate()).unwrap();
        let err = analyze(&silence, &audio, &tokens, &AnalysisConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoSpeech));
    }

    #[test]
    fn transcript_mismatch_fails_alignment() {
        let (_, audio) = sentence();
        let tokens = tokenize("one two three four five six seven eight nine ten eleven twelve thirteen");
        let err = analyze(&audio, &audio, &tokens, &AnalysisConfig::default()).unwrap_err();
        assert!(matches!(err, Error::AlignmentFailed { found: 6, expected: 13 }));
    }

    #[test]
    fn reports_serialize_identically() {
        let (tokens, audio) = sentence();
        let a = analyze(&audio, &audio, &tokens, &AnalysisConfig::default()).unwrap().to_json();
        let b = analyze(&audio, &audio, &tokens, &AnalysisConfig::default()).unwrap().to_json();
        assert_eq!(a, b);
        assert!(a.starts_with("{\n  \"version\": 1,"));
    }
}
