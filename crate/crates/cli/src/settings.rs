//! Configuration layering: defaults, then a config file, then flags.

use std::path::{Path, PathBuf};

use clap::Args;
use emphadet::AnalysisConfig;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const CONFIG_ENV: &str = "EMPHADET_CONFIG";

/// Per-run overrides. Unset flags leave the layered value alone, so defaults
/// live only in the core configuration types.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// JSON config file (partial documents allowed); defaults to $EMPHADET_CONFIG
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Peak lag beyond which a word counts as pitched
    #[arg(long, value_name = "HZ")]
    pub pitch_threshold_hz: Option<f64>,
    /// Correlation peak below which a word counts as skewed
    #[arg(long, value_name = "VALUE")]
    pub corr_threshold: Option<f64>,
    /// Largest lag searched in either direction
    #[arg(long, value_name = "HZ")]
    pub max_lag_hz: Option<f64>,
    #[arg(long, value_name = "HZ")]
    pub band_min_hz: Option<f64>,
    #[arg(long, value_name = "HZ")]
    pub band_max_hz: Option<f64>,
    #[arg(long, value_name = "MS")]
    pub window_ms: Option<f64>,
    #[arg(long, value_name = "MS")]
    pub hop_ms: Option<f64>,
    /// Silence threshold as a fraction of the loudest frame
    #[arg(long, value_name = "FRACTION")]
    pub relative_threshold: Option<f64>,
    #[arg(long, value_name = "MS")]
    pub min_word_ms: Option<f64>,
    #[arg(long, value_name = "MS")]
    pub min_gap_ms: Option<f64>,
    /// Print the effective configuration and where each layer came from
    #[arg(long)]
    pub show_config: bool,
}

/// The effective configuration and the layers that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Layered {
    pub config: AnalysisConfig,
    pub file: Option<PathBuf>,
    pub flags: Vec<&'static str>,
}

impl Layered {
    pub fn describe(&self) -> String {
        let file = self.file.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        let flags = if self.flags.is_empty() { "none".to_string() } else { self.flags.join(", ") };
        format!(
            "precedence: defaults < config file < flags\nconfig file: {file}\nflags: {flags}\n{}\n",
            serde_json::to_string_pretty(&self.config).expect("config serializes")
        )
    }
}

pub fn load_file(path: &Path) -> Result<AnalysisConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))
}

impl ConfigFlags {
    pub fn resolve(&self) -> Result<Layered, CliError> {
        let file = self.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        let mut config = match &file {
            Some(path) => load_file(path)?,
            None => AnalysisConfig::default(),
        };
        let mut flags = Vec::new();
        let mut set = |name: &'static str, value: Option<f64>, slot: &mut f64| {
            if let Some(v) = value {
                *slot = v;
                flags.push(name);
            }
        };
        set("pitch_threshold_hz", self.pitch_threshold_hz, &mut config.classifier.pitch_threshold_hz);
        set("corr_threshold", self.corr_threshold, &mut config.classifier.corr_threshold);
        set("max_lag_hz", self.max_lag_hz, &mut config.classifier.max_lag_hz);
        set("band_min_hz", self.band_min_hz, &mut config.spectral.band_min_hz);
        set("band_max_hz", self.band_max_hz, &mut config.spectral.band_max_hz);
        set("window_ms", self.window_ms, &mut config.segmentation.window_ms);
        set("hop_ms", self.hop_ms, &mut config.segmentation.hop_ms);
        set("relative_threshold", self.relative_threshold, &mut config.segmentation.relative_threshold);
        set("min_word_ms", self.min_word_ms, &mut config.segmentation.min_word_ms);
        set("min_gap_ms", self.min_gap_ms, &mut config.segmentation.min_gap_ms);
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Layered { config, file, flags })
    }
}

/// Applies a partial JSON document on top of `base`. Unknown keys and values
/// that break a module invariant are rejected.
pub fn apply_overrides(base: &AnalysisConfig, overrides: &Value) -> Result<AnalysisConfig, String> {
    let mut merged = serde_json::to_value(base).expect("config serializes");
    merge(&mut merged, overrides);
    let config: AnalysisConfig = serde_json::from_value(merged).map_err(|e| format!("overrides: {e}"))?;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (key, value) in o {
                match b.get_mut(key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        b.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        (slot, value) => *slot = value.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_merge_deeply() {
        let cfg = apply_overrides(&AnalysisConfig::default(), &json!({"classifier": {"corr_threshold": 0.3}})).unwrap();
        assert_eq!(cfg.classifier.corr_threshold, 0.3);
        assert_eq!(cfg.classifier.pitch_threshold_hz, 40.0);
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let base = AnalysisConfig::default();
        assert!(apply_overrides(&base, &json!({"classifier": {"nope": 1}})).is_err());
        assert!(apply_overrides(&base, &json!({"classifier": {"corr_threshold": 2.0}})).is_err());
    }

    #[test]
    fn flags_beat_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"classifier": {"pitch_threshold_hz": 60, "corr_threshold": 0.4}}"#).unwrap();
        let flags = ConfigFlags { config: Some(path.clone()), pitch_threshold_hz: Some(70.0), ..Default::default() };
        let layered = flags.resolve().unwrap();
        assert_eq!(layered.config.classifier.pitch_threshold_hz, 70.0);
        assert_eq!(layered.config.classifier.corr_threshold, 0.4);
        assert_eq!(layered.flags, ["pitch_threshold_hz"]);
        assert_eq!(layered.file, Some(path));
    }
}
