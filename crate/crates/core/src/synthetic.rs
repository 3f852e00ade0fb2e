//! Seeded ECG-like generator with class-conditional beat morphology, for
//! tests, demos and desk-scale training runs without the real dataset.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::labels::BinaryLabel;
use crate::wfdb::{render_index, write_record, DatasetIndex, EcgRecord, IndexRow, ScpCodes, WfdbError, STANDARD_LEADS};

/// ADC units per millivolt used when writing fixtures.
pub const FIXTURE_GAIN: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Morphology {
    Normal,
    WideQrs,
    InvertedT,
    StShift,
}

impl Morphology {
    pub const ABNORMAL: [Morphology; 3] = [Morphology::WideQrs, Morphology::InvertedT, Morphology::StShift];

    pub fn label(self) -> BinaryLabel {
        match self {
            Morphology::Normal => BinaryLabel::Normal,
            _ => BinaryLabel::Abnormal,
        }
    }

    /// A statement code whose superclass matches the label.
    pub fn scp_code(self) -> &'static str {
        match self {
            Morphology::Normal => "NORM",
            Morphology::WideQrs => "CLBBB",
            Morphology::InvertedT => "NDT",
            Morphology::StShift => "ISC_",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub sampling_rate: f64,
    pub duration_s: f64,
    pub leads: Vec<String>,
    pub abnormal_fraction: f64,
    pub noise_mv: f64,
    pub drift_mv: f64,
    pub powerline_mv: f64,
    pub powerline_hz: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            sampling_rate: 100.0,
            duration_s: 10.0,
            leads: STANDARD_LEADS.iter().map(|s| s.to_string()).collect(),
            abnormal_fraction: 0.5,
            noise_mv: 0.03,
            drift_mv: 0.25,
            powerline_mv: 0.02,
            powerline_hz: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecord {
    pub record: EcgRecord,
    pub morphology: Morphology,
}

impl SyntheticRecord {
    pub fn label(&self) -> BinaryLabel {
        self.morphology.label()
    }
}

/// Projection of the cardiac source onto each standard lead.
fn lead_gain(lead: &str) -> f64 {
    match lead.to_ascii_uppercase().as_str() {
        "I" => 1.0,
        "II" => 1.2,
        "III" => 0.5,
        "AVR" => -1.0,
        "AVL" => 0.4,
        "AVF" => 0.8,
        "V1" => -0.6,
        "V2" => 0.4,
        "V3" => 0.8,
        "V4" => 1.3,
        "V5" => 1.2,
        "V6" => 1.0,
        _ => 1.0,
    }
}

struct Wave {
    amp: f64,
    centre: f64,
    width: f64,
}

fn beat_waves(m: Morphology, rng: &mut ChaCha8Rng) -> Vec<Wave> {
    let mut j = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let t_amp = 0.3 * j(0.8, 1.2);
    let mut waves = vec![
        Wave {
            amp: 0.15 * j(0.8, 1.2),
            centre: -0.2,
            width: 0.025,
        },
        Wave {
            amp: -0.1 * j(0.8, 1.2),
            centre: -0.025,
            width: 0.01,
        },
        Wave {
            amp: -0.25 * j(0.8, 1.2),
            centre: 0.03,
            width: 0.012,
        },
    ];
    match m {
        Morphology::WideQrs => {
            let w = j(0.028, 0.04);
            waves.push(Wave {
                amp: 0.75 * j(0.8, 1.2),
                centre: -0.03,
                width: w,
            });
            waves.push(Wave {
                amp: 0.7 * j(0.8, 1.2),
                centre: 0.035,
                width: w,
            });
            waves.push(Wave {
                amp: -0.2 * t_amp / 0.3,
                centre: 0.32,
                width: 0.07,
            });
        }
        _ => waves.push(Wave {
            amp: j(0.9, 1.2),
            centre: 0.0,
            width: 0.012,
        }),
    }
    match m {
        Morphology::InvertedT => waves.push(Wave {
            amp: -t_amp * j(0.9, 1.4),
            centre: 0.3,
            width: 0.06,
        }),
        Morphology::WideQrs => {}
        _ => waves.push(Wave {
            amp: t_amp,
            centre: 0.3,
            width: 0.06,
        }),
    }
    waves
}

fn gauss(t: f64, w: &Wave) -> f64 {
    let z = (t - w.centre) / w.width;
    w.amp * (-0.5 * z * z).exp()
}

/// Smooth plateau between the end of QRS and the start of T.
fn st_segment(t: f64, level: f64) -> f64 {
    let rise = 1.0 / (1.0 + (-(t - 0.06) / 0.01).exp());
    let fall = 1.0 / (1.0 + ((t - 0.24) / 0.015).exp());
    level * rise * fall
}

/// One record; the stream is keyed by `index` so records are independent
/// of generation order.
pub fn generate_record(index: u64, config: &SyntheticConfig, seed: u64) -> SyntheticRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let morphology = if rng.random_bool(config.abnormal_fraction.clamp(0.0, 1.0)) {
        Morphology::ABNORMAL[rng.random_range(0..3)]
    } else {
        Morphology::Normal
    };
    let fs = config.sampling_rate;
    let n = (config.duration_s * fs).round() as usize;
    let waves = beat_waves(morphology, &mut rng);
    let st_level = match morphology {
        Morphology::StShift => {
            let mag = rng.random_range(0.12..0.25);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        }
        _ => 0.0,
    };

    let rr_mean = 60.0 / rng.random_range(55.0..95.0);
    let mut peaks = vec![rng.random_range(0.1..rr_mean)];
    while *peaks.last().unwrap() < config.duration_s + 1.0 {
        let jitter: f64 = rng.random_range(-0.04..0.04);
        peaks.push(peaks.last().unwrap() + rr_mean * (1.0 + jitter));
    }
    let source: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            peaks
                .iter()
                .filter(|&&p| (t - p).abs() < 0.6)
                .map(|&p| {
                    let dt = t - p;
                    waves.iter().map(|w| gauss(dt, w)).sum::<f64>() + st_segment(dt, st_level)
                })
                .sum()
        })
        .collect();

    let samples = config
        .leads
        .iter()
        .map(|lead| {
            let g = lead_gain(lead) * rng.random_range(0.85..1.15);
            let drift: Vec<(f64, f64, f64)> = (0..2)
                .map(|_| {
                    (
                        rng.random_range(0.0..config.drift_mv.max(f64::MIN_POSITIVE)),
                        rng.random_range(0.05..0.4),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            source
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let t = i as f64 / fs;
                    let wander: f64 = drift
                        .iter()
                        .map(|(a, f, ph)| a * (std::f64::consts::TAU * f * t + ph).sin())
                        .sum();
                    let mains = config.powerline_mv * (std::f64::consts::TAU * config.powerline_hz * t + phase).sin();
                    let noise: f64 = rng.sample::<f64, _>(StandardNormal) * config.noise_mv;
                    g * s + wander + mains + noise
                })
                .collect()
        })
        .collect();

    SyntheticRecord {
        record: EcgRecord {
            ecg_id: index as u32 + 1,
            sampling_rate: fs,
            samples,
            lead_names: config.leads.clone(),
        },
        morphology,
    }
}

pub fn generate_dataset(n: usize, config: &SyntheticConfig, seed: u64) -> Vec<SyntheticRecord> {
    (0..n as u64).map(|i| generate_record(i, config, seed)).collect()
}

/// PTB-XL style fold for the `i`-th generated record: 1..=10 round robin.
pub fn fold_for(index: usize) -> u8 {
    (index % 10) as u8 + 1
}

fn record_path(ecg_id: u32, rate: &str, suffix: &str) -> String {
    format!("records{rate}/{:05}/{ecg_id:05}_{suffix}", (ecg_id / 1000) * 1000)
}

/// Writes the records in the PTB-XL directory layout plus a
/// `ptbxl_database.csv`, returning the index written.
pub fn write_ptbxl_layout(root: &Path, records: &[SyntheticRecord]) -> Result<DatasetIndex, WfdbError> {
    let mut index = DatasetIndex::default();
    for (i, r) in records.iter().enumerate() {
        let id = r.record.ecg_id;
        let lr = record_path(id, "100", "lr");
        let hr = record_path(id, "500", "hr");
        let target = if r.record.sampling_rate == 500.0 { &hr } else { &lr };
        write_record(&root.join(target), &r.record, FIXTURE_GAIN)?;
        let mut scp = ScpCodes::new();
        scp.insert(r.morphology.scp_code().to_string(), 100.0);
        index.rows.push(IndexRow {
            ecg_id: id,
            scp_codes: scp,
            strat_fold: fold_for(i),
            filename_lr: lr,
            filename_hr: hr,
        });
    }
    let csv_path = root.join("ptbxl_database.csv");
    std::fs::write(&csv_path, render_index(&index)).map_err(|e| WfdbError::Io {
        path: csv_path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::select_binary_label;

    #[test]
    fn deterministic_and_order_independent() {
        let c = SyntheticConfig::default();
        let a = generate_dataset(5, &c, 3);
        assert_eq!(a, generate_dataset(5, &c, 3));
        assert_eq!(generate_record(3, &c, 3), a[3]);
        assert_ne!(generate_record(3, &c, 4), a[3]);
    }

    #[test]
    fn shape_and_balance() {
        let c = SyntheticConfig::default();
        let set = generate_dataset(200, &c, 1);
        assert!(set
            .iter()
            .all(|r| r.record.n_channels() == 12 && r.record.n_samples() == 1000));
        let abnormal = set.iter().filter(|r| r.label() == BinaryLabel::Abnormal).count();
        assert!((70..=130).contains(&abnormal), "{abnormal}");
        assert!(set
            .iter()
            .flat_map(|r| r.record.samples.iter().flatten())
            .all(|v| v.is_finite() && v.abs() < 10.0));
    }

    #[test]
    fn scp_codes_map_to_morphology_label() {
        for m in [
            Morphology::Normal,
            Morphology::WideQrs,
            Morphology::InvertedT,
            Morphology::StShift,
        ] {
            let mut scp = ScpCodes::new();
            scp.insert(m.scp_code().into(), 100.0);
            assert_eq!(select_binary_label(&scp).unwrap(), m.label());
        }
    }
}
