//! Browser bindings for the demo page in `www/`.
//!
//! Three operations, each returning a JSON document:
//!
//! * [`compare_demo`] renders a synthetic sentence, perturbs one word and
//!   analyzes the pair, so threshold and perturbation sliders can be explored
//!   without any audio files.
//! * [`segment_wav`] returns the RMS envelope and detected words of a WAV.
//! * [`analyze_wav`] analyzes an uploaded query against an uploaded reference.
//!
//! The `*_json` functions hold the logic and are plain Rust, so they run in
//! native tests as well.

use emphadet::audio_io::condition_with;
use emphadet::corpus::{render_utterance, Voice};
use emphadet::{
    analyze_with_evidence, detect_segments, make_labeled_pair, read_wav_bytes, rms_envelope, tokenize, AnalysisConfig,
    AnalysisReport, AudioBuffer, PerturbationSpec, WordEvidence,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Plot {
    index: usize,
    query_spectrum: Vec<(f64, f64)>,
    reference_spectrum: Vec<(f64, f64)>,
    correlation: Vec<(f64, f64)>,
}

impl Plot {
    /// Spectra thinned to at most `max_points` rows; the browser only draws them.
    fn from_evidence(e: &WordEvidence, max_points: usize) -> Self {
        let thin = |rows: Vec<(f64, f64)>| {
            let step = rows.len().div_ceil(max_points).max(1);
            rows.into_iter().step_by(step).collect()
        };
        Self {
            index: e.index,
            query_spectrum: thin(e.query_spectrum.rows()),
            reference_spectrum: thin(e.reference_spectrum.rows()),
            correlation: thin(e.correlation.rows()),
        }
    }
}

#[derive(Serialize)]
struct Analysis {
    report: AnalysisReport,
    plots: Vec<Plot>,
    query_envelope: Vec<f64>,
    reference_envelope: Vec<f64>,
    hop_s: f64,
}

fn parse_config(config_json: &str) -> Result<AnalysisConfig, String> {
    if config_json.trim().is_empty() {
        return Ok(AnalysisConfig::default());
    }
    let config: AnalysisConfig = serde_json::from_str(config_json).map_err(|e| format!("config: {e}"))?;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn envelope(buffer: &AudioBuffer, config: &AnalysisConfig) -> Result<(Vec<f64>, f64), String> {
    let env = rms_envelope(buffer, &config.segmentation).map_err(|e| e.to_string())?;
    Ok((env.values, env.hop as f64 / buffer.sample_rate() as f64))
}

fn run_analysis(query: &AudioBuffer, reference: &AudioBuffer, tokens: &[String], config: &AnalysisConfig) -> Result<String, String> {
    let (report, evidence) = analyze_with_evidence(query, reference, tokens, config).map_err(|e| e.to_string())?;
    let (query_envelope, hop_s) = envelope(query, config)?;
    let (reference_envelope, _) = envelope(reference, config)?;
    let analysis = Analysis {
        report,
        plots: evidence.iter().map(|e| Plot::from_evidence(e, 1200)).collect(),
        query_envelope,
        reference_envelope,
        hop_s,
    };
    Ok(serde_json::to_string(&analysis).expect("analysis serializes"))
}

/// `kind` is `"pitch"`, `"skew"` or `"none"`. For pitch, `amount_hz` is the
/// shift; for skew it is the peak deviation and `rate_hz` the modulation rate.
pub fn compare_demo_json(
    text: &str,
    f0_hz: f64,
    word_index: usize,
    kind: &str,
    amount_hz: f64,
    rate_hz: f64,
    config_json: &str,
) -> Result<String, String> {
    let config = parse_config(config_json)?;
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err("the sentence has no words".into());
    }
    if !(40.0..=400.0).contains(&f0_hz) {
        return Err(format!("voice pitch must be within 40..400 Hz, got {f0_hz}"));
    }
    let reference = render_utterance(&tokens, &Voice::new(f0_hz), 7).audio;
    let specs = match kind {
        "pitch" => vec![PerturbationSpec::pitch(word_index, amount_hz)],
        "skew" => vec![PerturbationSpec::skew(word_index, amount_hz, rate_hz)],
        "none" => vec![],
        other => return Err(format!("unknown perturbation {other:?}")),
    };
    let (query, _) = make_labeled_pair(&reference, &tokens, &specs, &config.segmentation).map_err(|e| e.to_string())?;
    run_analysis(&query, &reference, &tokens, &config)
}

pub fn segment_wav_json(wav: &[u8], config_json: &str) -> Result<String, String> {
    let config = parse_config(config_json)?;
    let audio = condition_with(&read_wav_bytes(wav).map_err(|e| e.to_string())?, &config.segmentation).map_err(|e| e.to_string())?;
    let env = rms_envelope(&audio, &config.segmentation).map_err(|e| e.to_string())?;
    let segments = detect_segments(&env, &config.segmentation).map_err(|e| e.to_string())?;
    let rate = audio.sample_rate();
    let words: Vec<_> = segments
        .iter()
        .map(|s| serde_json::json!({ "start_s": s.start_s(rate), "end_s": s.end_s(rate), "peak_rms": s.peak_rms }))
        .collect();
    Ok(serde_json::json!({
        "duration_s": audio.duration_s(),
        "hop_s": env.hop as f64 / rate as f64,
        "threshold": env.threshold(config.segmentation.relative_threshold),
        "envelope": env.values,
        "segments": words,
    })
    .to_string())
}

pub fn analyze_wav_json(query: &[u8], reference: &[u8], transcript: &str, config_json: &str) -> Result<String, String> {
    let config = parse_config(config_json)?;
    let load = |bytes: &[u8]| {
        read_wav_bytes(bytes).and_then(|b| condition_with(&b, &config.segmentation)).map_err(|e| e.to_string())
    };
    let tokens = tokenize(transcript);
    if tokens.is_empty() {
        return Err("the transcript has no words".into());
    }
    run_analysis(&load(query)?, &load(reference)?, &tokens, &config)
}

#[wasm_bindgen]
pub fn compare_demo(
    text: &str,
    f0_hz: f64,
    word_index: usize,
    kind: &str,
    amount_hz: f64,
    rate_hz: f64,
    config_json: &str,
) -> Result<String, JsError> {
    compare_demo_json(text, f0_hz, word_index, kind, amount_hz, rate_hz, config_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn segment_wav(wav: &[u8], config_json: &str) -> Result<String, JsError> {
    segment_wav_json(wav, config_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn analyze_wav(query: &[u8], reference: &[u8], transcript: &str, config_json: &str) -> Result<String, JsError> {
    analyze_wav_json(query, reference, transcript, config_json).map_err(|e| JsError::new(&e))
}

/// Default configuration as JSON, for initializing the page's controls.
#[wasm_bindgen]
pub fn default_config() -> String {
    serde_json::to_string(&AnalysisConfig::default()).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_config_means_defaults() {
        assert_eq!(parse_config("  ").unwrap(), AnalysisConfig::default());
        assert_eq!(parse_config(&default_config()).unwrap(), AnalysisConfig::default());
        assert!(parse_config("{\"segmentation\":{\"hop_ms\":-1}}").is_err());
    }
}
