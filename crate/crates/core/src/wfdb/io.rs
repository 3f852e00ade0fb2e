use std::fs;
use std::path::{Path, PathBuf};

use super::{
    decode_format16, encode_format16, parse_header, render_scp_codes, DatasetIndex, DecodedRecord, EcgRecord,
    RecordHeader, SignalSpec, WfdbError,
};

fn io_err(path: &Path, e: std::io::Error) -> WfdbError {
    WfdbError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Reads `<base>.hea` and the signal file it names (resolved next to it).
pub fn read_record(base: &Path) -> Result<DecodedRecord, WfdbError> {
    let hea = with_ext(base, "hea");
    let text = fs::read_to_string(&hea).map_err(|e| io_err(&hea, e))?;
    let header = parse_header(&text)?;
    let file = header
        .signals
        .first()
        .map(|s| s.file_name.clone())
        .ok_or(WfdbError::EmptyRecord)?;
    if let Some(other) = header.signals.iter().find(|s| s.file_name != file) {
        return Err(WfdbError::SchemaError(format!(
            "signals split across files {file} and {}",
            other.file_name
        )));
    }
    let dat = hea.parent().unwrap_or(Path::new("")).join(&file);
    let bytes = fs::read(&dat).map_err(|e| io_err(&dat, e))?;
    decode_format16(&header, &bytes)
}

/// Writes `<base>.hea` and `<base>.dat` with a shared gain and zero baseline.
pub fn write_record(base: &Path, record: &EcgRecord, gain: f64) -> Result<RecordHeader, WfdbError> {
    let stem = base
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| WfdbError::SchemaError(format!("bad record path {}", base.display())))?
        .to_owned();
    let dat_name = format!("{stem}.dat");
    let mut header = RecordHeader {
        record_name: stem,
        n_signals: record.n_channels(),
        sampling_rate: record.sampling_rate,
        n_samples: record.n_samples(),
        signals: record
            .lead_names
            .iter()
            .map(|l| SignalSpec::format16(&dat_name, gain, 0, l))
            .collect(),
    };
    let bytes = encode_format16(&header, record)?;
    fill_initial_and_checksum(&mut header, &bytes);
    if let Some(dir) = base.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let hea = with_ext(base, "hea");
    fs::write(&hea, header.to_text()).map_err(|e| io_err(&hea, e))?;
    let dat = with_ext(base, "dat");
    fs::write(&dat, bytes).map_err(|e| io_err(&dat, e))?;
    Ok(header)
}

/// WFDB's per-signal first sample and 16-bit sample sum.
fn fill_initial_and_checksum(header: &mut RecordHeader, bytes: &[u8]) {
    let n = header.signals.len();
    let mut sums = vec![0i16; n];
    for (i, pair) in bytes.chunks_exact(2).enumerate() {
        let v = i16::from_le_bytes([pair[0], pair[1]]);
        if i < n {
            header.signals[i].initial_value = Some(v as i32);
        }
        sums[i % n] = sums[i % n].wrapping_add(v);
    }
    for (s, sum) in header.signals.iter_mut().zip(sums) {
        s.checksum = Some(sum as i32);
    }
}

/// Renders the columns [`super::load_index`] requires.
pub fn render_index(index: &DatasetIndex) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["ecg_id", "scp_codes", "strat_fold", "filename_lr", "filename_hr"]);
    for r in &index.rows {
        let _ = w.write_record([
            r.ecg_id.to_string(),
            render_scp_codes(&r.scp_codes),
            r.strat_fold.to_string(),
            r.filename_lr.clone(),
            r.filename_hr.clone(),
        ]);
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}
