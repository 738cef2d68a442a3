//! Word separation from a sliding RMS envelope.
//!
//! Frames whose RMS reaches a fraction of the loudest frame are speech; runs of
//! speech frames become word candidates, short pauses are bridged, and blips
//! shorter than a word are dropped. [`align_to_token_count`] then forces the
//! word count to match the transcript.

use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    /// Silence threshold as a fraction of the envelope peak.
    pub relative_threshold: f64,
    pub min_word_ms: f64,
    pub min_gap_ms: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self { window_ms: 25.0, hop_ms: 10.0, relative_threshold: 0.05, min_word_ms: 80.0, min_gap_ms: 60.0 }
    }
}

/// Segmentation durations converted to sample counts at one sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    pub window: usize,
    pub hop: usize,
    pub min_word: usize,
    pub min_gap: usize,
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window_ms", self.window_ms),
            ("hop_ms", self.hop_ms),
            ("min_word_ms", self.min_word_ms),
            ("min_gap_ms", self.min_gap_ms),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("segmentation.{name} must be positive, got {value}")));
            }
        }
        if !(self.relative_threshold > 0.0 && self.relative_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "segmentation.relative_threshold must be in (0, 1), got {}",
                self.relative_threshold
            )));
        }
        Ok(())
    }

    pub fn frames(&self, sample_rate: u32) -> Result<FrameGeometry> {
        self.validate()?;
        let to_samples = |ms: f64| (ms * sample_rate as f64 / 1000.0).round() as usize;
        let geometry = FrameGeometry {
            window: to_samples(self.window_ms),
            hop: to_samples(self.hop_ms),
            min_word: to_samples(self.min_word_ms),
            min_gap: to_samples(self.min_gap_ms),
        };
        if geometry.window == 0 || geometry.hop == 0 {
            return Err(Error::InvalidConfig("window and hop must span at least one sample".into()));
        }
        Ok(geometry)
    }
}

/// Sliding-window RMS levels of a buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsEnvelope {
    pub values: Vec<f64>,
    pub hop: usize,
    pub window: usize,
    pub sample_rate: u32,
    /// Length of the buffer the envelope was computed from.
    pub buffer_len: usize,
}

impl RmsEnvelope {
    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn threshold(&self, relative: f64) -> f64 {
        relative * self.peak()
    }

    /// Sample index at the centre of frame `frame`.
    pub fn frame_center(&self, frame: usize) -> usize {
        frame * self.hop + self.window / 2
    }

    fn peak_between(&self, start: usize, end: usize) -> Option<f64> {
        (0..self.values.len())
            .filter(|&f| (start..end).contains(&self.frame_center(f)))
            .map(|f| self.values[f])
            .reduce(f64::max)
    }
}

/// One word as a half-open sample range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordSegment {
    pub start_sample: usize,
    pub end_sample: usize,
    pub peak_rms: f64,
}

impl WordSegment {
    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.end_sample <= self.start_sample
    }

    pub fn start_s(&self, sample_rate: u32) -> f64 {
        self.start_sample as f64 / sample_rate as f64
    }

    pub fn end_s(&self, sample_rate: u32) -> f64 {
        self.end_sample as f64 / sample_rate as f64
    }
}

pub fn rms_envelope(buffer: &AudioBuffer, config: &SegmentationConfig) -> Result<RmsEnvelope> {
    let FrameGeometry { window, hop, .. } = config.frames(buffer.sample_rate())?;
    let samples = buffer.samples();
    if samples.len() < window {
        return Err(Error::BufferTooShort { len: samples.len(), window });
    }
    let mut energy = Vec::with_capacity(samples.len() + 1);
    energy.push(0.0);
    let mut acc = 0.0;
    for &s in samples {
        acc += s * s;
        energy.push(acc);
    }
    let count = (samples.len() - window) / hop + 1;
    let values = (0..count)
        .map(|i| {
            let start = i * hop;
            let sum = (energy[start + window] - energy[start]).max(0.0);
            (sum / window as f64).sqrt()
        })
        .collect();
    Ok(RmsEnvelope { values, hop, window, sample_rate: buffer.sample_rate(), buffer_len: samples.len() })
}

/// Converts a run of voiced frames `first..=last` into a sample span.
///
/// A frame reaches the threshold as soon as its window touches the word, so
/// the outermost frames of a run are mostly silence. The span therefore starts
/// at the frame `window / hop - 1/2` positions inside the run (and ends that
/// many frames before its end), which puts a sharp onset within half a hop of
/// the boundary. A run that touches frame 0 keeps the buffer start.
pub(crate) fn run_span(voiced: &[bool], first: usize, last: usize, window: usize, hop: usize) -> (usize, usize) {
    let inset = (window as f64 / hop as f64 - 0.5).round().max(0.0) as usize;
    let lead = (0..=inset).rev().find(|&j| first + j <= last && voiced[first + j]).unwrap_or(0);
    let tail = (0..=inset).rev().find(|&j| last >= first + j && voiced[last - j]).unwrap_or(0);
    let (lead, tail) = if first + lead > last - tail { (0, 0) } else { (lead, tail) };
    let start = if first == 0 { 0 } else { (first + lead) * hop };
    let end = (last - tail) * hop + window;
    (start, end)
}

/// Finds word candidates in an envelope.
///
/// Returns an empty list for silent input; callers that need speech map that
/// to [`Error::NoSpeech`].
pub fn detect_segments(envelope: &RmsEnvelope, config: &SegmentationConfig) -> Result<Vec<WordSegment>> {
    let geometry = config.frames(envelope.sample_rate)?;
    let threshold = envelope.threshold(config.relative_threshold);
    if threshold <= 0.0 {
        return Ok(Vec::new());
    }
    let voiced: Vec<bool> = envelope.values.iter().map(|&v| v >= threshold).collect();

    let mut candidates: Vec<WordSegment> = Vec::new();
    let mut f = 0;
    while f < voiced.len() {
        if !voiced[f] {
            f += 1;
            continue;
        }
        let first = f;
        while f + 1 < voiced.len() && voiced[f + 1] {
            f += 1;
        }
        let last = f;
        let (start, end) = run_span(&voiced, first, last, envelope.window, envelope.hop);
        let peak_rms = envelope.values[first..=last].iter().copied().fold(0.0, f64::max);
        let end = end.min(envelope.buffer_len);

        match candidates.last_mut() {
            Some(prev) if start < prev.end_sample + geometry.min_gap => {
                prev.end_sample = prev.end_sample.max(end);
                prev.peak_rms = prev.peak_rms.max(peak_rms);
            }
            _ => candidates.push(WordSegment { start_sample: start, end_sample: end, peak_rms }),
        }
        f += 1;
    }
    candidates.retain(|s| s.len() >= geometry.min_word);
    Ok(candidates)
}

/// Merges or splits segments until there are exactly `k` of them.
///
/// Extra segments are removed by joining the adjacent pair with the shortest
/// pause; missing ones are created by cutting the longest segment at its
/// quietest interior frame. Disagreements larger than `max(2, count / 2)` are
/// refused.
pub fn align_to_token_count(segments: &[WordSegment], envelope: &RmsEnvelope, k: usize) -> Result<Vec<WordSegment>> {
    if k == 0 {
        return Err(Error::InvalidConfig("token count must be at least 1".into()));
    }
    let count = segments.len();
    if count == 0 {
        return Err(Error::NoSpeech);
    }
    if count.abs_diff(k) > 2.max(count / 2) {
        return Err(Error::AlignmentFailed { found: count, expected: k });
    }
    let mut out = segments.to_vec();
    while out.len() > k {
        let i = (0..out.len() - 1)
            .min_by_key(|&i| out[i + 1].start_sample.saturating_sub(out[i].end_sample))
            .expect("at least two segments");
        let next = out.remove(i + 1);
        out[i].end_sample = next.end_sample;
        out[i].peak_rms = out[i].peak_rms.max(next.peak_rms);
    }
    while out.len() < k {
        let i = (0..out.len())
            .max_by(|&a, &b| out[a].len().cmp(&out[b].len()).then(b.cmp(&a)))
            .expect("non-empty");
        let seg = out[i];
        if seg.len() < 2 {
            return Err(Error::AlignmentFailed { found: count, expected: k });
        }
        let cut = split_point(&seg, envelope);
        let left = WordSegment {
            start_sample: seg.start_sample,
            end_sample: cut,
            peak_rms: envelope.peak_between(seg.start_sample, cut).unwrap_or(seg.peak_rms),
        };
        let right = WordSegment {
            start_sample: cut,
            end_sample: seg.end_sample,
            peak_rms: envelope.peak_between(cut, seg.end_sample).unwrap_or(seg.peak_rms),
        };
        out.splice(i..=i, [left, right]);
    }
    Ok(out)
}

/// Quietest frame centre strictly inside the segment, away from its edges.
fn split_point(seg: &WordSegment, envelope: &RmsEnvelope) -> usize {
    let margin = (seg.len() / 4).max(1);
    let (lo, hi) = (seg.start_sample + margin, seg.end_sample - margin);
    let mid = (seg.start_sample + seg.end_sample) / 2;
    (0..envelope.values.len())
        .map(|f| (f, envelope.frame_center(f)))
        .filter(|&(_, c)| c > lo && c < hi)
        .min_by(|&(fa, ca), &(fb, cb)| {
            envelope.values[fa]
                .total_cmp(&envelope.values[fb])
                .then(ca.abs_diff(mid).cmp(&cb.abs_diff(mid)))
        })
        .map(|(_, c)| c)
        .unwrap_or(mid)
}
