//! Word emphasis detection by comparing a spoken utterance against a
//! neutral (emphasis-free) rendition of the same text in the same voice.
//!
//! Both waveforms are split into words with a sliding RMS envelope, each word
//! is reduced to a unit-energy magnitude spectrum, and corresponding words are
//! cross-correlated over frequency lags. A large lag at the correlation peak
//! means the word was pitched ([`EmphasisLabel::Pitch`]); a low peak at every
//! lag means its energy was smeared across the band ([`EmphasisLabel::Skew`]).
//!
//! ```
//! use emphadet::{analyze, corpus, AnalysisConfig};
//!
//! let tokens: Vec<String> = ["i", "did", "not", "take", "your", "bag"]
//!     .iter().map(|s| s.to_string()).collect();
//! let voice = corpus::Voice::new(140.0);
//! let reference = corpus::render_utterance(&tokens, &voice, 7).audio;
//! let report = analyze(&reference, &reference, &tokens, &AnalysisConfig::default()).unwrap();
//! assert!(report.emphasized_indices().is_empty());
//! ```

pub mod audio_io;
pub mod comparator;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evalharness;
pub mod perturb;
pub mod pipeline;
pub mod provider;
pub mod segmentation;
pub mod spectral;

pub use audio_io::{condition, read_wav, read_wav_bytes, write_wav, write_wav_bytes, AudioBuffer, WORKING_RATE};
pub use comparator::{classify, compare_word, cross_correlate, ClassifierConfig, CorrResult, EmphasisLabel};
pub use config::AnalysisConfig;
pub use error::{Error, Result};
pub use evalharness::{evaluate, load_manifest, Confusion, DatasetManifest, EvalMetrics, EvalOutcome, ManifestEntry};
pub use perturb::{make_labeled_pair, pitch_shift_word, skew_word, PerturbationKind, PerturbationSpec};
pub use pipeline::{analyze, analyze_with_evidence, tokenize, AnalysisReport, WordEvidence, WordResult};
pub use provider::{ReferenceProvider, UtteranceKey};
pub use segmentation::{align_to_token_count, detect_segments, rms_envelope, RmsEnvelope, SegmentationConfig, WordSegment};
pub use spectral::{magnitude_spectrum, normalize_energy, resample_to_grid, SpectralConfig, Spectrum};
