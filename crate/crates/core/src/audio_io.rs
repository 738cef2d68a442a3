//! WAV input/output and waveform conditioning.
//!
//! Everything downstream works on mono audio at [`WORKING_RATE`]. Files at
//! other rates are linearly resampled, stereo files are averaged to mono, and
//! [`condition`] strips the silent lead-in and tail using the same envelope
//! rules the word segmenter uses.

use std::io::{Cursor, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::segmentation::{self, SegmentationConfig};

/// Sample rate every analysis runs at.
pub const WORKING_RATE: u32 = 16_000;

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Builds a buffer, rejecting empty or non-finite sample data and a zero rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidBuffer("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidBuffer("no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidBuffer(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Same buffer with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Copy of `samples[start..end]` at the same rate.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.samples.len() {
            return Err(Error::SegmentOutOfBounds { start, end, len: self.samples.len() });
        }
        Self::new(self.samples[start..end].to_vec(), self.sample_rate)
    }
}

/// On-disk sample encoding used by [`write_wav_as`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Pcm24,
    Float32,
}

impl WavEncoding {
    fn spec(self, sample_rate: u32) -> WavSpec {
        let (bits_per_sample, sample_format) = match self {
            WavEncoding::Pcm16 => (16, SampleFormat::Int),
            WavEncoding::Pcm24 => (24, SampleFormat::Int),
            WavEncoding::Float32 => (32, SampleFormat::Float),
        };
        WavSpec { channels: 1, sample_rate, bits_per_sample, sample_format }
    }
}

/// Reads a PCM WAV file (8/16/24/32-bit integer or 32-bit float, mono or
/// stereo) into a mono buffer scaled to [-1, 1].
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let reader = WavReader::open(path).map_err(map_hound_error)?;
    decode(reader)
}

/// Same as [`read_wav`] for an in-memory file.
pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(map_hound_error)?;
    decode(reader)
}

fn decode<R: Read>(mut reader: WavReader<R>) -> Result<AudioBuffer> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedFormat(format!("{channels} channels")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound_error)?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let full_scale = (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound_error)?
        }
        (format, bits) => {
            return Err(Error::UnsupportedFormat(format!("{bits}-bit {format:?}")));
        }
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::CorruptHeader("truncated final frame".into()));
    }
    let mono = if channels == 1 {
        interleaved
    } else {
        mix_to_mono(&interleaved, channels)
    };
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Averages interleaved frames into one channel.
pub fn mix_to_mono(interleaved: &[f64], channels: usize) -> Vec<f64> {
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect()
}

fn map_hound_error(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e)
            if matches!(e.kind(), std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied) =>
        {
            Error::Io(e)
        }
        // Short reads surface as I/O errors from hound.
        hound::Error::IoError(e) => Error::CorruptHeader(format!("truncated file: {e}")),
        hound::Error::FormatError(msg) => Error::CorruptHeader(msg.into()),
        hound::Error::Unsupported => Error::UnsupportedFormat("codec not supported".into()),
        hound::Error::TooWide => Error::UnsupportedFormat("sample too wide".into()),
        hound::Error::InvalidSampleFormat => Error::UnsupportedFormat("invalid sample format".into()),
        other => Error::CorruptHeader(other.to_string()),
    }
}

/// Writes the buffer as 16-bit PCM mono.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<()> {
    write_wav_as(buffer, path, WavEncoding::Pcm16)
}

pub fn write_wav_as(buffer: &AudioBuffer, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let writer = WavWriter::create(path, encoding.spec(buffer.sample_rate)).map_err(write_error)?;
    encode(buffer, writer, encoding)
}

/// Encodes the buffer as an in-memory 16-bit PCM mono WAV file.
pub fn write_wav_bytes(buffer: &AudioBuffer) -> Result<Vec<u8>> {
    let mut cursor = Cursor::new(Vec::new());
    let writer = WavWriter::new(&mut cursor, WavEncoding::Pcm16.spec(buffer.sample_rate)).map_err(write_error)?;
    encode(buffer, writer, WavEncoding::Pcm16)?;
    Ok(cursor.into_inner())
}

fn encode<W: Write + Seek>(buffer: &AudioBuffer, mut writer: WavWriter<W>, encoding: WavEncoding) -> Result<()> {
    match encoding {
        WavEncoding::Float32 => {
            for &s in &buffer.samples {
                writer.write_sample(s as f32).map_err(write_error)?;
            }
        }
        WavEncoding::Pcm16 | WavEncoding::Pcm24 => {
            let bits = if encoding == WavEncoding::Pcm16 { 16 } else { 24 };
            let full_scale = (1i64 << (bits - 1)) as f64;
            let (lo, hi) = (-full_scale, full_scale - 1.0);
            for &s in &buffer.samples {
                let q = (s * full_scale).round().clamp(lo, hi) as i32;
                writer.write_sample(q).map_err(write_error)?;
            }
        }
    }
    writer.finalize().map_err(write_error)
}

fn write_error(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(other.to_string())),
    }
}

/// Linear-interpolation resampling to `target_rate`.
pub fn resample_linear(buffer: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    if buffer.sample_rate == target_rate {
        return buffer.clone();
    }
    let src = &buffer.samples;
    let ratio = buffer.sample_rate as f64 / target_rate as f64;
    let out_len = ((src.len() - 1) as f64 / ratio).floor() as usize + 1;
    let samples = (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            match src.get(i + 1) {
                Some(&next) => src[i] + (next - src[i]) * frac,
                None => src[i],
            }
        })
        .collect();
    AudioBuffer { samples, sample_rate: target_rate }
}

/// Resamples to [`WORKING_RATE`] and trims silent edges with the default
/// segmentation settings.
pub fn condition(buffer: &AudioBuffer) -> Result<AudioBuffer> {
    condition_with(buffer, &SegmentationConfig::default())
}

/// Resamples to [`WORKING_RATE`], then removes leading and trailing spans
/// whose sliding RMS stays below the relative silence threshold.
///
/// Interior samples are never modified, and applying the function twice
/// yields the same buffer as applying it once.
pub fn condition_with(buffer: &AudioBuffer, config: &SegmentationConfig) -> Result<AudioBuffer> {
    let resampled = resample_linear(buffer, WORKING_RATE);
    let frames = config.frames(WORKING_RATE)?;
    if resampled.len() < frames.window {
        // Too short to frame; only an all-zero buffer counts as silent here.
        if resampled.samples.iter().all(|&s| s == 0.0) {
            return Err(Error::EmptyAfterTrim);
        }
        return Ok(resampled);
    }
    let envelope = segmentation::rms_envelope(&resampled, config)?;
    let threshold = envelope.threshold(config.relative_threshold);
    let voiced: Vec<bool> = envelope.values.iter().map(|&v| threshold > 0.0 && v >= threshold).collect();
    let first = voiced.iter().position(|&v| v).ok_or(Error::EmptyAfterTrim)?;
    let last = voiced.iter().rposition(|&v| v).ok_or(Error::EmptyAfterTrim)?;

    let (start, mut end) = segmentation::run_span(&voiced, first, last, frames.window, frames.hop);
    if last + 1 == voiced.len() {
        end = resampled.len();
    }
    if start == 0 && end == resampled.len() {
        return Ok(resampled);
    }
    Ok(AudioBuffer { samples: resampled.samples[start..end].to_vec(), sample_rate: WORKING_RATE })
}
