//! Per-word magnitude spectra on explicit frequency grids.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};
use crate::segmentation::WordSegment;

/// Frequency band that word spectra are compared over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub band_min_hz: f64,
    pub band_max_hz: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { band_min_hz: 60.0, band_max_hz: 4000.0 }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_min_hz.is_finite() && self.band_max_hz.is_finite())
            || self.band_min_hz < 0.0
            || self.band_min_hz >= self.band_max_hz
        {
            return Err(Error::InvalidConfig(format!(
                "spectral band [{}, {}] Hz must satisfy 0 <= min < max",
                self.band_min_hz, self.band_max_hz
            )));
        }
        Ok(())
    }
}

/// Magnitudes sampled at `f_lo_hz + i * df_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub df_hz: f64,
    pub f_lo_hz: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    pub fn f_hi_hz(&self) -> f64 {
        self.f_lo_hz + self.df_hz * (self.magnitudes.len().saturating_sub(1)) as f64
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        self.f_lo_hz + bin as f64 * self.df_hz
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.magnitudes.iter().map(|m| m * m).sum()
    }

    /// Energy of the full two-sided spectrum that this non-negative half came
    /// from: interior bins count twice, DC and Nyquist once.
    pub fn two_sided_energy(&self) -> f64 {
        let n = self.magnitudes.len();
        match n {
            0 => 0.0,
            1 => self.magnitudes[0].powi(2),
            _ => {
                let edges = self.magnitudes[0].powi(2) + self.magnitudes[n - 1].powi(2);
                let interior: f64 = self.magnitudes[1..n - 1].iter().map(|m| m * m).sum();
                edges + 2.0 * interior
            }
        }
    }

    pub fn peak_bin(&self) -> Option<usize> {
        self.magnitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
    }

    /// `(frequency_hz, magnitude)` rows for plotting.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        self.magnitudes.iter().enumerate().map(|(i, &m)| (self.frequency(i), m)).collect()
    }

    fn same_grid(&self, other: &Spectrum) -> bool {
        let tol = 1e-9 * self.df_hz.max(other.df_hz);
        self.magnitudes.len() == other.magnitudes.len()
            && (self.df_hz - other.df_hz).abs() <= tol
            && (self.f_lo_hz - other.f_lo_hz).abs() <= tol
    }
}

/// Magnitude spectrum of one word.
///
/// The word's samples are zero-padded to the next power of two and
/// transformed without a taper. Magnitudes use the unitary DFT scaling
/// (`|X_k| / sqrt(n)`), so [`Spectrum::two_sided_energy`] equals the word's
/// time-domain energy.
pub fn magnitude_spectrum(buffer: &AudioBuffer, segment: &WordSegment) -> Result<Spectrum> {
    if segment.is_empty() {
        return Err(Error::EmptySegment);
    }
    if segment.end_sample > buffer.len() {
        return Err(Error::SegmentOutOfBounds {
            start: segment.start_sample,
            end: segment.end_sample,
            len: buffer.len(),
        });
    }
    let words = &buffer.samples()[segment.start_sample..segment.end_sample];
    let fft_size = words.len().next_power_of_two();
    let mut bins: Vec<Complex<f64>> = words.iter().map(|&s| Complex::new(s, 0.0)).collect();
    bins.resize(fft_size, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(fft_size).process(&mut bins);

    let scale = 1.0 / (fft_size as f64).sqrt();
    let magnitudes = bins[..=fft_size / 2].iter().map(|c| c.norm() * scale).collect();
    Ok(Spectrum { magnitudes, df_hz: buffer.sample_rate() as f64 / fft_size as f64, f_lo_hz: 0.0 })
}

/// Scales magnitudes so their squares sum to one.
pub fn normalize_energy(spectrum: &Spectrum) -> Result<Spectrum> {
    let energy = spectrum.energy();
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::ZeroEnergy);
    }
    let scale = energy.sqrt().recip();
    Ok(Spectrum {
        magnitudes: spectrum.magnitudes.iter().map(|m| m * scale).collect(),
        df_hz: spectrum.df_hz,
        f_lo_hz: spectrum.f_lo_hz,
    })
}

/// Linearly interpolates the spectrum at `band.0, band.0 + target_df_hz, ...`
/// up to `band.1`, then renormalizes to unit energy.
pub fn resample_to_grid(spectrum: &Spectrum, target_df_hz: f64, band: (f64, f64)) -> Result<Spectrum> {
    if !(target_df_hz > 0.0 && target_df_hz.is_finite()) {
        return Err(Error::InvalidConfig(format!("target resolution must be positive, got {target_df_hz}")));
    }
    let (lo, hi) = band;
    let slack = 1e-9 * spectrum.df_hz.max(target_df_hz);
    if spectrum.is_empty() || lo > hi || lo < spectrum.f_lo_hz - slack || hi > spectrum.f_hi_hz() + slack {
        return Err(Error::BandOutOfRange {
            lo_hz: lo,
            hi_hz: hi,
            cover_lo_hz: spectrum.f_lo_hz,
            cover_hi_hz: spectrum.f_hi_hz(),
        });
    }
    let count = ((hi - lo) / target_df_hz + 1e-9).floor() as usize + 1;
    let last = spectrum.magnitudes.len() - 1;
    let magnitudes = (0..count)
        .map(|j| {
            let pos = ((lo + j as f64 * target_df_hz - spectrum.f_lo_hz) / spectrum.df_hz).max(0.0);
            let i = (pos.floor() as usize).min(last);
            let frac = pos - i as f64;
            if i == last || frac <= 0.0 {
                spectrum.magnitudes[i]
            } else {
                spectrum.magnitudes[i] * (1.0 - frac) + spectrum.magnitudes[i + 1] * frac
            }
        })
        .collect();
    normalize_energy(&Spectrum { magnitudes, df_hz: target_df_hz, f_lo_hz: lo })
}

/// Puts two spectra on a shared grid: the finer of their resolutions over the
/// configured band.
pub fn to_common_grid(a: &Spectrum, b: &Spectrum, config: &SpectralConfig) -> Result<(Spectrum, Spectrum)> {
    config.validate()?;
    let df = a.df_hz.min(b.df_hz);
    let band = (config.band_min_hz, config.band_max_hz);
    Ok((resample_to_grid(a, df, band)?, resample_to_grid(b, df, band)?))
}

pub(crate) fn check_same_grid(a: &Spectrum, b: &Spectrum) -> Result<()> {
    if a.same_grid(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}
