//! Signal conditioning in the order the pipeline applies it:
//! Butterworth low-pass against powerline noise, wavelet baseline-wander
//! removal (`fixed = original − baseline`), then a centered rolling mean.

mod filter;
mod spectrogram;
mod wavelet;

pub use filter::{apply_filter, design_lowpass, Biquad, SosCascade};
pub use spectrogram::{stft_spectrogram, Spectrogram, DB_FLOOR};
pub use wavelet::{dwt_analyze, dwt_synthesize, DwtCoefficients, WaveletSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wfdb::EcgRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("filter design error: {0}")]
    DesignError(String),
    #[error("signal too short: need at least {needed} samples, got {actual}")]
    SignalTooShort { needed: usize, actual: usize },
    #[error("wavelet decomposition error: {0}")]
    DecompositionError(String),
    #[error("wavelet reconstruction error: {0}")]
    ReconstructionError(String),
    #[error("unknown wavelet {0:?}")]
    UnknownWavelet(String),
    #[error("window must be at least 1 sample")]
    InvalidWindow,
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub lowpass_order: usize,
    pub lowpass_cutoff_hz: f64,
    pub wavelet: String,
    pub baseline_target_hz: f64,
    pub rolling_window: usize,
    pub rolling_enabled: bool,
    pub zero_phase: bool,
    /// Largest tolerated fraction of residual sub-target energy per channel.
    pub quality_max_residual: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            lowpass_order: 15,
            lowpass_cutoff_hz: 45.0,
            wavelet: "db4".into(),
            baseline_target_hz: 0.5,
            rolling_window: 100,
            rolling_enabled: true,
            zero_phase: true,
            quality_max_residual: 0.10,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self, fs: f64) -> Result<(), DspError> {
        let bad = |m: String| Err(DspError::InvalidConfig(m));
        if self.lowpass_order == 0 {
            return bad("lowpass_order must be at least 1".into());
        }
        if !(self.lowpass_cutoff_hz > 0.0 && self.lowpass_cutoff_hz < fs / 2.0) {
            return bad(format!(
                "lowpass_cutoff_hz {} must be below Nyquist ({} Hz)",
                self.lowpass_cutoff_hz,
                fs / 2.0
            ));
        }
        if !(self.baseline_target_hz > 0.0 && self.baseline_target_hz < fs / 2.0) {
            return bad(format!("baseline_target_hz {} out of range", self.baseline_target_hz));
        }
        if self.rolling_window == 0 {
            return bad("rolling_window must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.quality_max_residual) {
            return bad("quality_max_residual must lie in [0, 1]".into());
        }
        WaveletSpec::by_name(&self.wavelet)?;
        Ok(())
    }
}

/// Smallest `L` with `fs / 2^(L+1) ≤ target_hz`: the approximation band
/// after `L` levels then lies below the target.
pub fn baseline_levels(fs: f64, target_hz: f64) -> usize {
    let mut levels = 1;
    while fs / 2f64.powi(levels as i32 + 1) > target_hz {
        levels += 1;
    }
    levels
}

fn estimate_baseline_with(x: &[f64], wavelet: &WaveletSpec, levels: usize) -> Result<Vec<f64>, DspError> {
    let mut coeffs = dwt_analyze(x, wavelet, levels)?;
    for d in &mut coeffs.details {
        d.iter_mut().for_each(|v| *v = 0.0);
    }
    dwt_synthesize(&coeffs)
}

/// Baseline wander: reconstruction from the deepest approximation band only.
pub fn estimate_baseline(x: &[f64], fs: f64, config: &PreprocessConfig) -> Result<Vec<f64>, DspError> {
    let wavelet = WaveletSpec::by_name(&config.wavelet)?;
    estimate_baseline_with(x, &wavelet, baseline_levels(fs, config.baseline_target_hz))
}

/// `x − estimate_baseline(x)`, element-wise.
pub fn remove_baseline(x: &[f64], fs: f64, config: &PreprocessConfig) -> Result<Vec<f64>, DspError> {
    let baseline = estimate_baseline(x, fs, config)?;
    Ok(subtract(x, &baseline))
}

fn subtract(x: &[f64], baseline: &[f64]) -> Vec<f64> {
    x.iter().zip(baseline).map(|(o, b)| o - b).collect()
}

/// Centered moving average. Even windows reach one sample further back
/// than forward; windows are truncated at the edges.
pub fn rolling_mean(x: &[f64], window: usize) -> Result<Vec<f64>, DspError> {
    if window == 0 {
        return Err(DspError::InvalidWindow);
    }
    if x.is_empty() || window == 1 {
        return Ok(x.to_vec());
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let back = window / 2;
    let forward = window - 1 - back;
    let n = x.len();
    Ok((0..n)
        .map(|i| {
            let span = &x[i.saturating_sub(back)..(i + forward + 1).min(n)];
            let mean = span.iter().sum::<f64>() / span.len() as f64;
            mean.clamp(lo, hi)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum QualityVerdict {
    Keep,
    Drop { channel: usize, residual_fraction: f64 },
}

impl QualityVerdict {
    pub fn is_keep(&self) -> bool {
        matches!(self, QualityVerdict::Keep)
    }
}

/// Flags records whose corrected channels still carry more than
/// `quality_max_residual` of their energy below the baseline band.
pub fn quality_gate(record: &EcgRecord, config: &PreprocessConfig) -> Result<QualityVerdict, DspError> {
    let wavelet = WaveletSpec::by_name(&config.wavelet)?;
    let levels = baseline_levels(record.sampling_rate, config.baseline_target_hz);
    for (channel, x) in record.samples.iter().enumerate() {
        let total: f64 = x.iter().map(|v| v * v).sum();
        if total == 0.0 {
            continue;
        }
        let residual = estimate_baseline_with(x, &wavelet, levels)?;
        let low: f64 = residual.iter().map(|v| v * v).sum();
        let residual_fraction = low / total;
        if residual_fraction > config.quality_max_residual {
            return Ok(QualityVerdict::Drop {
                channel,
                residual_fraction,
            });
        }
    }
    Ok(QualityVerdict::Keep)
}

/// Designed filters for one sampling rate, reusable across records.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    config: PreprocessConfig,
    sos: SosCascade,
    wavelet: WaveletSpec,
    levels: usize,
}

impl Preprocessor {
    pub fn new(config: &PreprocessConfig, fs: f64) -> Result<Self, DspError> {
        config.validate(fs)?;
        Ok(Self {
            sos: design_lowpass(config.lowpass_order, config.lowpass_cutoff_hz, fs)?,
            wavelet: WaveletSpec::by_name(&config.wavelet)?,
            levels: baseline_levels(fs, config.baseline_target_hz),
            config: config.clone(),
        })
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sos.sampling_rate
    }

    /// Low-pass then baseline correction, without the rolling mean.
    pub fn correct_channel(&self, x: &[f64]) -> Result<Vec<f64>, DspError> {
        let filtered = apply_filter(&self.sos, x, self.config.zero_phase)?;
        let baseline = estimate_baseline_with(&filtered, &self.wavelet, self.levels)?;
        Ok(subtract(&filtered, &baseline))
    }

    pub fn channel(&self, x: &[f64]) -> Result<Vec<f64>, DspError> {
        self.smooth_channel(self.correct_channel(x)?)
    }

    fn smooth_channel(&self, fixed: Vec<f64>) -> Result<Vec<f64>, DspError> {
        if self.config.rolling_enabled {
            rolling_mean(&fixed, self.config.rolling_window)
        } else {
            Ok(fixed)
        }
    }

    fn check_rate(&self, rec: &EcgRecord) -> Result<(), DspError> {
        if rec.sampling_rate != self.sampling_rate() {
            return Err(DspError::InvalidConfig(format!(
                "preprocessor designed for {} Hz, record is {} Hz",
                self.sampling_rate(),
                rec.sampling_rate
            )));
        }
        Ok(())
    }

    fn map_channels(
        &self,
        rec: &EcgRecord,
        f: impl Fn(&[f64]) -> Result<Vec<f64>, DspError>,
    ) -> Result<EcgRecord, DspError> {
        Ok(EcgRecord {
            ecg_id: rec.ecg_id,
            sampling_rate: rec.sampling_rate,
            samples: rec.samples.iter().map(|x| f(x)).collect::<Result<_, _>>()?,
            lead_names: rec.lead_names.clone(),
        })
    }

    pub fn record(&self, rec: &EcgRecord) -> Result<EcgRecord, DspError> {
        self.check_rate(rec)?;
        self.map_channels(rec, |x| self.channel(x))
    }

    /// The baseline-corrected record, its quality verdict, and the fully
    /// conditioned record.
    pub fn record_gated(&self, rec: &EcgRecord) -> Result<(EcgRecord, QualityVerdict), DspError> {
        self.check_rate(rec)?;
        let corrected = self.map_channels(rec, |x| self.correct_channel(x))?;
        let verdict = quality_gate(&corrected, &self.config)?;
        let done = self.map_channels(&corrected, |x| self.smooth_channel(x.to_vec()))?;
        Ok((done, verdict))
    }
}

/// Low-pass, baseline correction and optional rolling mean on every channel.
pub fn preprocess_record(rec: &EcgRecord, config: &PreprocessConfig) -> Result<EcgRecord, DspError> {
    Preprocessor::new(config, rec.sampling_rate)?.record(rec)
}
