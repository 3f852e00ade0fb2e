use std::fmt::Write as _;

use super::WfdbError;

/// Per-lead decoding parameters from one header signal line.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub file_name: String,
    pub storage_format: u16,
    /// ADC units per millivolt.
    pub gain: f64,
    pub adc_baseline: i32,
    pub units: String,
    pub lead_name: String,
    // Parsed but never verified.
    pub adc_resolution: Option<u32>,
    pub adc_zero: Option<i32>,
    pub initial_value: Option<i32>,
    pub checksum: Option<i32>,
    pub block_size: Option<i32>,
}

impl SignalSpec {
    /// A format-16 millivolt signal with PTB-XL's defaults.
    pub fn format16(file_name: &str, gain: f64, adc_baseline: i32, lead_name: &str) -> Self {
        Self {
            file_name: file_name.to_owned(),
            storage_format: 16,
            gain,
            adc_baseline,
            units: "mV".to_owned(),
            lead_name: lead_name.to_owned(),
            adc_resolution: Some(16),
            adc_zero: Some(0),
            initial_value: Some(0),
            checksum: Some(0),
            block_size: Some(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sampling_rate: f64,
    pub n_samples: usize,
    pub signals: Vec<SignalSpec>,
}

impl RecordHeader {
    /// Renders the header in the layout PTB-XL ships.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {}",
            self.record_name, self.n_signals, self.sampling_rate, self.n_samples
        );
        for s in &self.signals {
            let _ = writeln!(
                out,
                "{} {} {:?}({})/{} {} {} {} {} {} {}",
                s.file_name,
                s.storage_format,
                s.gain,
                s.adc_baseline,
                s.units,
                s.adc_resolution.unwrap_or(16),
                s.adc_zero.unwrap_or(0),
                s.initial_value.unwrap_or(0),
                s.checksum.unwrap_or(0),
                s.block_size.unwrap_or(0),
                s.lead_name
            );
        }
        out
    }

    pub fn lead_names(&self) -> Vec<String> {
        self.signals.iter().map(|s| s.lead_name.clone()).collect()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> WfdbError {
    WfdbError::ParseError {
        line,
        message: message.into(),
    }
}

/// Parses a WFDB header: a record line `name n_signals fs n_samples`
/// followed by one line per signal. `#` comment lines are skipped and
/// unknown trailing fields are ignored.
pub fn parse_header(text: &str) -> Result<RecordHeader, WfdbError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (record_line_no, record_line) = lines.next().ok_or_else(|| parse_err(1, "empty header"))?;
    let fields: Vec<&str> = record_line.split_whitespace().collect();
    if fields.len() < 4 {
        return Err(parse_err(
            record_line_no,
            "record line needs `name n_signals fs n_samples`",
        ));
    }
    let record_name = fields[0].to_owned();
    let n_signals: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(record_line_no, format!("bad signal count {:?}", fields[1])))?;
    // fs may carry a counter frequency and base counter: `500/1000(0)`.
    let fs_text = fields[2].split(['/', '(']).next().unwrap_or_default();
    let sampling_rate: f64 = fs_text
        .parse()
        .ok()
        .filter(|fs: &f64| fs.is_finite() && *fs > 0.0)
        .ok_or_else(|| parse_err(record_line_no, format!("bad sampling rate {:?}", fields[2])))?;
    let n_samples: usize = fields[3]
        .parse()
        .map_err(|_| parse_err(record_line_no, format!("bad sample count {:?}", fields[3])))?;

    let signals = lines
        .map(|(no, line)| parse_signal_line(no, line))
        .collect::<Result<Vec<_>, _>>()?;
    if signals.len() != n_signals {
        return Err(WfdbError::InconsistentHeader {
            declared: n_signals,
            found: signals.len(),
        });
    }

    Ok(RecordHeader {
        record_name,
        n_signals,
        sampling_rate,
        n_samples,
        signals,
    })
}

fn parse_signal_line(line_no: usize, line: &str) -> Result<SignalSpec, WfdbError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 4 {
        return Err(parse_err(line_no, "signal line needs file, format, gain and lead name"));
    }
    let file_name = fields[0].to_owned();

    // Format may carry `x` (samples per frame), `:` (skew) or `+` (offset) suffixes.
    let fmt_text = fields[1].split(['x', ':', '+']).next().unwrap_or_default();
    let storage_format: u16 = fmt_text
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad format code {:?}", fields[1])))?;
    if storage_format != 16 {
        return Err(WfdbError::UnsupportedFormat(storage_format));
    }

    let (gain, explicit_baseline, units) = parse_gain_field(line_no, fields[2])?;

    // Up to five optional integer fields precede the description.
    let mut numeric = Vec::with_capacity(5);
    let mut rest = &fields[3..];
    while numeric.len() < 5 {
        match rest.first().and_then(|f| f.parse::<i64>().ok()) {
            Some(v) => {
                numeric.push(v);
                rest = &rest[1..];
            }
            None => break,
        }
    }
    let lead_name = rest.join(" ");
    if lead_name.is_empty() {
        return Err(parse_err(line_no, "missing lead name"));
    }
    let field = |i: usize| numeric.get(i).map(|&v| v as i32);
    let adc_zero = field(1);

    Ok(SignalSpec {
        file_name,
        storage_format,
        gain,
        // WFDB: an omitted baseline defaults to the ADC zero.
        adc_baseline: explicit_baseline.or(adc_zero).unwrap_or(0),
        units,
        lead_name,
        adc_resolution: numeric.first().map(|&v| v as u32),
        adc_zero,
        initial_value: field(2),
        checksum: field(3),
        block_size: field(4),
    })
}

/// `gain[(baseline)][/units]`
fn parse_gain_field(line_no: usize, text: &str) -> Result<(f64, Option<i32>, String), WfdbError> {
    let (head, units) = match text.split_once('/') {
        Some((h, u)) => (h, u.to_owned()),
        None => (text, "mV".to_owned()),
    };
    let (gain_text, baseline) = match head.split_once('(') {
        Some((g, b)) => {
            let b = b
                .strip_suffix(')')
                .ok_or_else(|| parse_err(line_no, format!("unbalanced baseline in {text:?}")))?;
            let b: i32 = b
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad baseline in {text:?}")))?;
            (g, Some(b))
        }
        None => (head, None),
    };
    let gain: f64 = gain_text
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad gain {gain_text:?}")))?;
    if !(gain.is_finite() && gain > 0.0) {
        return Err(parse_err(line_no, format!("gain must be positive, got {gain}")));
    }
    Ok((gain, baseline, units))
}
