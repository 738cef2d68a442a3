use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),
    #[error("input is silent after edge trimming")]
    EmptyAfterTrim,

    #[error("buffer of {len} samples is shorter than one {window}-sample window")]
    BufferTooShort { len: usize, window: usize },
    #[error("no speech detected")]
    NoSpeech,
    #[error("cannot align {found} detected words to {expected} transcript tokens")]
    AlignmentFailed { found: usize, expected: usize },

    #[error("segment is empty")]
    EmptySegment,
    #[error("segment [{start}, {end}) lies outside a buffer of {len} samples")]
    SegmentOutOfBounds { start: usize, end: usize, len: usize },
    #[error("spectrum has zero energy")]
    ZeroEnergy,
    #[error("band [{lo_hz}, {hi_hz}] Hz is outside the spectrum coverage [{cover_lo_hz}, {cover_hi_hz}] Hz")]
    BandOutOfRange { lo_hz: f64, hi_hz: f64, cover_lo_hz: f64, cover_hi_hz: f64 },
    #[error("spectra are on different frequency grids")]
    GridMismatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("provider timed out: {0}")]
    ProviderTimeout(String),
    #[error("provider error: {0}")]
    ProviderError(String),
    #[error("missing fixture: {0}")]
    MissingFixture(PathBuf),

    #[error("manifest parse error at line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error("manifest entry {speaker_id}/{utterance_id}: {message}")]
    InvalidIndex { speaker_id: String, utterance_id: String, message: String },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("dataset unusable: {skipped} of {total} entries skipped")]
    DatasetUnusable { skipped: usize, total: usize },
}

impl Error {
    /// Stable machine-readable name of the variant, used in service responses.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingFile(_) => "missing_file",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::CorruptHeader(_) => "corrupt_header",
            Error::Io(_) => "io_failure",
            Error::InvalidBuffer(_) => "invalid_buffer",
            Error::EmptyAfterTrim => "empty_after_trim",
            Error::BufferTooShort { .. } => "buffer_too_short",
            Error::NoSpeech => "no_speech",
            Error::AlignmentFailed { .. } => "alignment_failed",
            Error::EmptySegment => "empty_segment",
            Error::SegmentOutOfBounds { .. } => "segment_out_of_bounds",
            Error::ZeroEnergy => "zero_energy",
            Error::BandOutOfRange { .. } => "band_out_of_range",
            Error::GridMismatch => "grid_mismatch",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidPerturbation(_) => "invalid_perturbation",
            Error::ProviderUnreachable(_) => "provider_unreachable",
            Error::ProviderTimeout(_) => "provider_timeout",
            Error::ProviderError(_) => "provider_error",
            Error::MissingFixture(_) => "missing_fixture",
            Error::ParseError { .. } => "parse_error",
            Error::InvalidIndex { .. } => "invalid_index",
            Error::InvalidManifest(_) => "invalid_manifest",
            Error::DatasetUnusable { .. } => "dataset_unusable",
        }
    }
}
