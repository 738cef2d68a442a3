//! Labeled datasets and word-level accuracy, precision, recall and F1.
//!
//! Every word is one binary decision: emphasized (Pitch or Skew) or not.
//! Entries whose segmentation cannot be reconciled with their transcript are
//! skipped and counted, not scored as wrong.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio_io::{condition_with, read_wav};
use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::pipeline::{analyze, tokenize};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub speaker_id: String,
    pub utterance_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub query_path: String,
    pub reference_path: String,
    pub transcript: String,
    pub emphasized_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self { version: MANIFEST_VERSION, entries, base_dir: None }
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Checks indices, uniqueness and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::InvalidManifest(format!(
                "unsupported version {} (expected {MANIFEST_VERSION})",
                self.version
            )));
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert((&entry.speaker_id, &entry.utterance_id)) {
                return Err(Error::InvalidManifest(format!(
                    "duplicate utterance {}/{}",
                    entry.speaker_id, entry.utterance_id
                )));
            }
            let tokens = tokenize(&entry.transcript).len();
            if let Some(&bad) = entry.emphasized_indices.iter().find(|&&i| i >= tokens) {
                return Err(Error::InvalidIndex {
                    speaker_id: entry.speaker_id.clone(),
                    utterance_id: entry.utterance_id.clone(),
                    message: format!("emphasized index {bad} but the transcript has {tokens} tokens"),
                });
            }
            for p in [&entry.query_path, &entry.reference_path] {
                let resolved = self.resolve(p);
                if !resolved.is_file() {
                    return Err(Error::MissingFile(resolved));
                }
            }
        }
        Ok(())
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let mut manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::ParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    for entry in &mut manifest.entries {
        entry.emphasized_indices.sort_unstable();
        entry.emphasized_indices.dedup();
    }
    manifest.base_dir = path.parent().map(Path::to_path_buf);
    manifest.validate()?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn record(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_labels(truth: &[bool], predicted: &[bool]) -> Self {
        let mut c = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            c.record(t, p);
        }
        c
    }

    pub fn merge(self, other: Self) -> Self {
        Self { tp: self.tp + other.tp, fp: self.fp + other.fp, fn_: self.fn_ + other.fn_, tn: self.tn + other.tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Percentages in [0, 100]. Undefined ratios (empty denominators) are 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

impl EvalMetrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { accuracy: ratio(c.tp + c.tn, c.total()), precision, recall, f1, confusion: c }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub metrics: EvalMetrics,
    pub evaluated: usize,
    pub skipped: usize,
    /// `speaker/utterance: reason` for each skipped entry.
    pub skipped_entries: Vec<String>,
}

impl EvalOutcome {
    pub fn table(&self) -> String {
        let m = &self.metrics;
        let c = &m.confusion;
        format!(
            "metric      value\n\
             accuracy   {:>6.2}\n\
             precision  {:>6.2}\n\
             recall     {:>6.2}\n\
             f1         {:>6.2}\n\
             confusion  tp={} fp={} fn={} tn={}\n\
             entries    evaluated={} skipped={}\n",
            m.accuracy, m.precision, m.recall, m.f1, c.tp, c.fp, c.fn_, c.tn, self.evaluated, self.skipped
        )
    }
}

enum EntryResult {
    Scored(Confusion),
    Skipped(String),
}

fn evaluate_entry(manifest: &DatasetManifest, entry: &ManifestEntry, config: &AnalysisConfig) -> Result<EntryResult> {
    let tokens = tokenize(&entry.transcript);
    let load = |p: &str| read_wav(manifest.resolve(p)).and_then(|b| condition_with(&b, &config.segmentation));
    let outcome = load(&entry.query_path)
        .and_then(|query| Ok((query, load(&entry.reference_path)?)))
        .and_then(|(query, reference)| analyze(&query, &reference, &tokens, config));
    let report = match outcome {
        Ok(report) => report,
        Err(e @ (Error::AlignmentFailed { .. } | Error::NoSpeech | Error::EmptyAfterTrim | Error::BufferTooShort { .. })) => {
            return Ok(EntryResult::Skipped(format!("{}/{}: {e}", entry.speaker_id, entry.utterance_id)));
        }
        Err(e) => return Err(e),
    };
    let truth: Vec<bool> = (0..tokens.len()).map(|i| entry.emphasized_indices.contains(&i)).collect();
    let predicted: Vec<bool> = report.words.iter().map(|w| w.label.is_emphasized()).collect();
    Ok(EntryResult::Scored(Confusion::from_labels(&truth, &predicted)))
}

/// Runs the analysis on every entry and scores it word by word.
///
/// Entries are processed on all available cores. More than half of the
/// entries being skipped makes the dataset unusable.
pub fn evaluate(manifest: &DatasetManifest, config: &AnalysisConfig) -> Result<EvalOutcome> {
    config.validate()?;
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(manifest.entries.len().max(1));
    let chunk = manifest.entries.len().div_ceil(workers).max(1);
    let results: Vec<Result<EntryResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = manifest
            .entries
            .chunks(chunk)
            .map(|entries| scope.spawn(move || entries.iter().map(|e| evaluate_entry(manifest, e, config)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("evaluation worker panicked")).collect()
    });

    let mut confusion = Confusion::default();
    let mut evaluated = 0;
    let mut skipped_entries = Vec::new();
    for result in results {
        match result? {
            EntryResult::Scored(c) => {
                confusion = confusion.merge(c);
                evaluated += 1;
            }
            EntryResult::Skipped(reason) => skipped_entries.push(reason),
        }
    }
    let total = manifest.entries.len();
    if skipped_entries.len() * 2 > total {
        return Err(Error::DatasetUnusable { skipped: skipped_entries.len(), total });
    }
    Ok(EvalOutcome {
        metrics: EvalMetrics::from_confusion(confusion),
        evaluated,
        skipped: skipped_entries.len(),
        skipped_entries,
    })
}
