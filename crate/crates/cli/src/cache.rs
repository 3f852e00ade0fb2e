//! Conditioned records on disk, one file per (record, preprocessing) pair.
//!
//! Layout, little-endian: `ECGP`, u16 version, u32 ecg_id, f64 sampling
//! rate, u32 repaired samples, u8 verdict (0 keep, 1 drop), u32 drop
//! channel, f64 residual fraction, u32 channels, u32 samples, per channel
//! a u8-prefixed lead name, then channel-major f32 samples.

use std::path::{Path, PathBuf};

use ecglite::dsp::{PreprocessConfig, QualityVerdict};
use ecglite::wfdb::EcgRecord;
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::CliError;

const MAGIC: &[u8; 4] = b"ECGP";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CachedRecord {
    pub record: EcgRecord,
    pub verdict: QualityVerdict,
    /// Invalid-sample sentinels replaced while decoding the source.
    pub repaired_samples: usize,
}

pub fn cache_key(ecg_id: u32, resolution: u32, config: &PreprocessConfig) -> String {
    let mut h = Sha256::new();
    h.update(ecg_id.to_le_bytes());
    h.update(resolution.to_le_bytes());
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex(&h.finalize())
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(&key[..2]).join(format!("{key}.ecgp"))
}

pub fn encode(cached: &CachedRecord) -> Vec<u8> {
    let rec = &cached.record;
    let mut out = Vec::with_capacity(48 + rec.n_channels() * (rec.n_samples() * 4 + 8));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rec.ecg_id.to_le_bytes());
    out.extend_from_slice(&rec.sampling_rate.to_le_bytes());
    out.extend_from_slice(&(cached.repaired_samples as u32).to_le_bytes());
    let (flag, channel, fraction) = match cached.verdict {
        QualityVerdict::Keep => (0u8, 0u32, 0.0f64),
        QualityVerdict::Drop {
            channel,
            residual_fraction,
        } => (1, channel as u32, residual_fraction),
    };
    out.push(flag);
    out.extend_from_slice(&channel.to_le_bytes());
    out.extend_from_slice(&fraction.to_le_bytes());
    out.extend_from_slice(&(rec.n_channels() as u32).to_le_bytes());
    out.extend_from_slice(&(rec.n_samples() as u32).to_le_bytes());
    for name in &rec.lead_names {
        let b = name.as_bytes();
        out.push(b.len().min(255) as u8);
        out.extend_from_slice(&b[..b.len().min(255)]);
    }
    for ch in &rec.samples {
        for &v in ch {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Option<CachedRecord> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Option<&[u8]> {
        let s = bytes.get(pos..pos.checked_add(n)?)?;
        pos += n;
        Some(s)
    };
    if take(4)? != MAGIC || u16::from_le_bytes(take(2)?.try_into().ok()?) != VERSION {
        return None;
    }
    let ecg_id = u32::from_le_bytes(take(4)?.try_into().ok()?);
    let sampling_rate = f64::from_le_bytes(take(8)?.try_into().ok()?);
    let repaired_samples = u32::from_le_bytes(take(4)?.try_into().ok()?) as usize;
    let flag = take(1)?[0];
    let channel = u32::from_le_bytes(take(4)?.try_into().ok()?) as usize;
    let residual_fraction = f64::from_le_bytes(take(8)?.try_into().ok()?);
    let verdict = match flag {
        0 => QualityVerdict::Keep,
        1 => QualityVerdict::Drop {
            channel,
            residual_fraction,
        },
        _ => return None,
    };
    let channels = u32::from_le_bytes(take(4)?.try_into().ok()?) as usize;
    let samples = u32::from_le_bytes(take(4)?.try_into().ok()?) as usize;
    let mut lead_names = Vec::with_capacity(channels.min(64));
    for _ in 0..channels {
        let n = take(1)?[0] as usize;
        lead_names.push(String::from_utf8(take(n)?.to_vec()).ok()?);
    }
    let mut data = Vec::with_capacity(channels.min(64));
    for _ in 0..channels {
        let raw = take(samples.checked_mul(4)?)?;
        data.push(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        );
    }
    if take(1).is_some() {
        return None;
    }
    Some(CachedRecord {
        record: EcgRecord {
            ecg_id,
            sampling_rate,
            samples: data,
            lead_names,
        },
        verdict,
        repaired_samples,
    })
}

pub fn load(path: &Path) -> Result<CachedRecord, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).ok_or_else(|| CliError::Pipeline(format!("corrupt cache file {}", path.display())))
}
