//! Spectral cross-correlation and the per-word emphasis decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{check_same_grid, to_common_grid, SpectralConfig, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Peak lags beyond this magnitude mark the word as pitched.
    pub pitch_threshold_hz: f64,
    /// Correlation peaks below this mark the word as skewed.
    pub corr_threshold: f64,
    /// Largest lag searched in either direction.
    pub max_lag_hz: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { pitch_threshold_hz: 40.0, corr_threshold: 0.55, max_lag_hz: 500.0 }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pitch_threshold_hz.is_finite() && self.pitch_threshold_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "classifier.pitch_threshold_hz must be positive, got {}",
                self.pitch_threshold_hz
            )));
        }
        if !(self.corr_threshold > 0.0 && self.corr_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "classifier.corr_threshold must be in (0, 1), got {}",
                self.corr_threshold
            )));
        }
        if !(self.max_lag_hz.is_finite() && self.max_lag_hz > 0.0) {
            return Err(Error::InvalidConfig(format!("classifier.max_lag_hz must be positive, got {}", self.max_lag_hz)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmphasisLabel {
    None,
    Pitch,
    Skew,
}

impl EmphasisLabel {
    pub fn is_emphasized(self) -> bool {
        self != EmphasisLabel::None
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmphasisLabel::None => "none",
            EmphasisLabel::Pitch => "pitch",
            EmphasisLabel::Skew => "skew",
        }
    }
}

impl std::fmt::Display for EmphasisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Correlation of two spectra as a function of frequency lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrResult {
    pub curve: Vec<f64>,
    pub lags_hz: Vec<f64>,
    pub peak_lag_hz: f64,
    pub peak_value: f64,
}

impl CorrResult {
    /// `(lag_hz, value)` rows for plotting.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        self.lags_hz.iter().copied().zip(self.curve.iter().copied()).collect()
    }

    pub fn value_at_lag(&self, lag_hz: f64) -> Option<f64> {
        self.lags_hz
            .iter()
            .position(|&l| (l - lag_hz).abs() < 1e-9 * lag_hz.abs().max(1.0))
            .map(|i| self.curve[i])
    }
}

/// `curve[tau] = sum_f a(f) * b(f + tau)` for lags up to `max_lag_hz` each way.
///
/// Bins shifted past either end count as zero. A positive peak lag means `b`
/// sits higher in frequency than `a`. Ties go to the smaller lag magnitude,
/// then to the negative lag.
pub fn cross_correlate(a: &Spectrum, b: &Spectrum, max_lag_hz: f64) -> Result<CorrResult> {
    check_same_grid(a, b)?;
    if !(max_lag_hz >= 0.0) {
        return Err(Error::InvalidConfig(format!("max lag must be non-negative, got {max_lag_hz}")));
    }
    let n = a.len();
    let max_lag = ((max_lag_hz / a.df_hz + 1e-9).floor() as usize).min(n.saturating_sub(1));
    let (xs, ys) = (&a.magnitudes, &b.magnitudes);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let at = |lag: isize| -> f64 {
        if lag >= 0 {
            let k = lag as usize;
            dot(&xs[..n - k], &ys[k..])
        } else {
            let k = lag.unsigned_abs();
            dot(&xs[k..], &ys[..n - k])
        }
    };

    let width = 2 * max_lag + 1;
    let mut curve = vec![0.0; width];
    let lags_hz = (0..width).map(|i| (i as f64 - max_lag as f64) * a.df_hz).collect();
    let mut best = (0isize, f64::NEG_INFINITY);
    // Visit 0, -1, +1, -2, +2, ... so strict improvement implements the tie rule.
    for step in 0..=max_lag as isize {
        for lag in if step == 0 { vec![0] } else { vec![-step, step] } {
            let value = at(lag);
            curve[(lag + max_lag as isize) as usize] = value;
            if value > best.1 {
                best = (lag, value);
            }
        }
    }
    Ok(CorrResult { curve, lags_hz, peak_lag_hz: best.0 as f64 * a.df_hz, peak_value: best.1 })
}

/// Skew when the peak is low, else Pitch when the peak lag is far from zero.
pub fn classify(result: &CorrResult, config: &ClassifierConfig) -> EmphasisLabel {
    if result.peak_value < config.corr_threshold {
        EmphasisLabel::Skew
    } else if result.peak_lag_hz.abs() > config.pitch_threshold_hz {
        EmphasisLabel::Pitch
    } else {
        EmphasisLabel::None
    }
}

/// Verdict plus the evidence behind it, with both spectra on the shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WordComparison {
    pub label: EmphasisLabel,
    pub correlation: CorrResult,
    pub query: Spectrum,
    pub reference: Spectrum,
}

pub fn compare_word(
    query: &Spectrum,
    reference: &Spectrum,
    spectral: &SpectralConfig,
    config: &ClassifierConfig,
) -> Result<(EmphasisLabel, CorrResult)> {
    let cmp = compare_word_detailed(query, reference, spectral, config)?;
    Ok((cmp.label, cmp.correlation))
}

pub fn compare_word_detailed(
    query: &Spectrum,
    reference: &Spectrum,
    spectral: &SpectralConfig,
    config: &ClassifierConfig,
) -> Result<WordComparison> {
    config.validate()?;
    let (query, reference) = to_common_grid(query, reference, spectral)?;
    let correlation = cross_correlate(&reference, &query, config.max_lag_hz)?;
    let label = classify(&correlation, config);
    Ok(WordComparison { label, correlation, query, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::normalize_energy;

    fn unit(magnitudes: Vec<f64>, df: f64) -> Spectrum {
        normalize_energy(&Spectrum { magnitudes, df_hz: df, f_lo_hz: 0.0 }).unwrap()
    }

    fn tone(bin: usize, n: usize, df: f64) -> Spectrum {
        let mut m = vec![0.0; n];
        m[bin] = 1.0;
        unit(m, df)
    }

    #[test]
    fn autocorrelation_peaks_at_zero() {
        let s = unit((0..200).map(|i| ((i * 37) % 11) as f64 + 0.5).collect(), 2.0);
        let r = cross_correlate(&s, &s, 100.0).unwrap();
        assert_eq!(r.peak_lag_hz, 0.0);
        assert!((r.peak_value - 1.0).abs() < 1e-9);
        assert_eq!(r.curve.len(), 101);
    }

    #[test]
    fn delta_against_flat() {
        let n = 256;
        let flat = unit(vec![1.0; n], 1.0);
        let r = cross_correlate(&tone(100, n, 1.0), &flat, 20.0).unwrap();
        assert!((r.peak_value - 1.0 / (n as f64).sqrt()).abs() < 1e-12);
        assert_eq!(r.peak_lag_hz, 0.0);
    }

    #[test]
    fn shifted_tone_gives_signed_lag() {
        let df = 4.0;
        let a = tone((1000.0 / df) as usize, 1000, df);
        let b = tone((1080.0 / df) as usize, 1000, df);
        let r = cross_correlate(&a, &b, 500.0).unwrap();
        assert!((r.peak_lag_hz - 80.0).abs() <= df);
        let back = cross_correlate(&b, &a, 500.0).unwrap();
        assert!((back.peak_lag_hz + 80.0).abs() <= df);
    }

    #[test]
    fn grids_must_match() {
        let a = tone(3, 10, 1.0);
        let b = tone(3, 11, 1.0);
        assert!(matches!(cross_correlate(&a, &b, 2.0), Err(Error::GridMismatch)));
        let c = tone(3, 10, 2.0);
        assert!(matches!(cross_correlate(&a, &c, 2.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn ties_prefer_small_then_negative_lags() {
        // b has two equal copies of a's delta at -2 and +2 bins.
        let a = tone(10, 21, 1.0);
        let mut m = vec![0.0; 21];
        m[8] = 1.0;
        m[12] = 1.0;
        let b = unit(m, 1.0);
        let r = cross_correlate(&a, &b, 5.0).unwrap();
        assert_eq!(r.peak_lag_hz, -2.0);
    }

    fn result(lag: f64, value: f64) -> CorrResult {
        CorrResult { curve: vec![value], lags_hz: vec![lag], peak_lag_hz: lag, peak_value: value }
    }

    #[test]
    fn classification_rules() {
        let cfg = ClassifierConfig::default();
        assert_eq!(classify(&result(80.0, 0.9), &cfg), EmphasisLabel::Pitch);
        assert_eq!(classify(&result(-80.0, 0.9), &cfg), EmphasisLabel::Pitch);
        assert_eq!(classify(&result(2.0, 0.95), &cfg), EmphasisLabel::None);
        assert_eq!(classify(&result(0.0, 0.2), &cfg), EmphasisLabel::Skew);
        assert_eq!(classify(&result(300.0, 0.2), &cfg), EmphasisLabel::Skew);
    }

    #[test]
    fn config_validation() {
        assert!(ClassifierConfig::default().validate().is_ok());
        assert!(ClassifierConfig { corr_threshold: 1.0, ..Default::default() }.validate().is_err());
        assert!(ClassifierConfig { pitch_threshold_hz: -1.0, ..Default::default() }.validate().is_err());
        assert!(ClassifierConfig { max_lag_hz: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn labels_serialize_lowercase() {
        assert_eq!(serde_json::to_string(&EmphasisLabel::Pitch).unwrap(), "\"pitch\"");
    }
}
