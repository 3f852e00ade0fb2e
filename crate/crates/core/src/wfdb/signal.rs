use super::{RecordHeader, WfdbError};

/// WFDB marker for an invalid sample in 16-bit formats.
pub const INVALID_SAMPLE: i16 = i16::MIN;

/// A multichannel ECG in millivolts, one row per lead.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub ecg_id: u32,
    pub sampling_rate: f64,
    pub samples: Vec<Vec<f64>>,
    pub lead_names: Vec<String>,
}

impl EcgRecord {
    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn channel(&self, lead: &str) -> Option<&[f64]> {
        self.lead_names
            .iter()
            .position(|l| l.eq_ignore_ascii_case(lead))
            .map(|i| self.samples[i].as_slice())
    }

    /// Keeps the named leads, in the order given.
    pub fn select_leads<S: AsRef<str>>(&self, leads: &[S]) -> Option<EcgRecord> {
        let mut samples = Vec::with_capacity(leads.len());
        let mut lead_names = Vec::with_capacity(leads.len());
        for lead in leads {
            samples.push(self.channel(lead.as_ref())?.to_vec());
            lead_names.push(lead.as_ref().to_owned());
        }
        Some(EcgRecord {
            ecg_id: self.ecg_id,
            sampling_rate: self.sampling_rate,
            samples,
            lead_names,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedRecord {
    pub record: EcgRecord,
    /// Number of invalid-sample sentinels replaced by the previous value.
    pub repaired_samples: usize,
}

/// Leading digits of a record name, e.g. `00042_lr` → 42.
fn ecg_id_from_name(name: &str) -> u32 {
    let base = name.rsplit('/').next().unwrap_or(name);
    let digits: String = base.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().unwrap_or(0)
}

/// Decodes a frame-interleaved, 16-bit little-endian signal file.
pub fn decode_format16(header: &RecordHeader, bytes: &[u8]) -> Result<DecodedRecord, WfdbError> {
    let n_sig = header.signals.len();
    let n = header.n_samples;
    if n == 0 || n_sig == 0 {
        return Err(WfdbError::EmptyRecord);
    }
    let expected = n_sig * n * 2;
    if bytes.len() != expected {
        return Err(WfdbError::TruncatedSignal {
            expected,
            actual: bytes.len(),
        });
    }

    let mut samples = vec![Vec::with_capacity(n); n_sig];
    let mut last = vec![0.0f64; n_sig];
    let mut repaired = 0;
    for (i, pair) in bytes.chunks_exact(2).enumerate() {
        let ch = i % n_sig;
        let stored = i16::from_le_bytes([pair[0], pair[1]]);
        let spec = &header.signals[ch];
        let value = if stored == INVALID_SAMPLE {
            repaired += 1;
            last[ch]
        } else {
            (f64::from(stored) - f64::from(spec.adc_baseline)) / spec.gain
        };
        last[ch] = value;
        samples[ch].push(value);
    }

    Ok(DecodedRecord {
        record: EcgRecord {
            ecg_id: ecg_id_from_name(&header.record_name),
            sampling_rate: header.sampling_rate,
            samples,
            lead_names: header.lead_names(),
        },
        repaired_samples: repaired,
    })
}

/// Inverse of [`decode_format16`]: quantizes millivolts with each signal's
/// gain and baseline. Values that round onto the invalid sentinel or outside
/// 16 bits are rejected.
pub fn encode_format16(header: &RecordHeader, record: &EcgRecord) -> Result<Vec<u8>, WfdbError> {
    let n_sig = header.signals.len();
    if record.samples.len() != n_sig {
        return Err(WfdbError::InconsistentHeader {
            declared: n_sig,
            found: record.samples.len(),
        });
    }
    let n = header.n_samples;
    if n == 0 {
        return Err(WfdbError::EmptyRecord);
    }
    if let Some(bad) = record.samples.iter().find(|row| row.len() != n) {
        return Err(WfdbError::TruncatedSignal {
            expected: n,
            actual: bad.len(),
        });
    }
    let mut out = Vec::with_capacity(n * n_sig * 2);
    for t in 0..n {
        for (ch, spec) in header.signals.iter().enumerate() {
            let mv = record.samples[ch][t];
            let stored = (mv * spec.gain + f64::from(spec.adc_baseline)).round();
            if !(stored > f64::from(INVALID_SAMPLE) && stored <= f64::from(i16::MAX)) {
                return Err(WfdbError::Unrepresentable { channel: ch, value: mv });
            }
            out.extend_from_slice(&(stored as i16).to_le_bytes());
        }
    }
    Ok(out)
}
