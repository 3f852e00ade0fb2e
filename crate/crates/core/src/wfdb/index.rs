use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::WfdbError;

/// SCP statement code → confidence percent.
pub type ScpCodes = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub ecg_id: u32,
    pub scp_codes: ScpCodes,
    pub strat_fold: u8,
    pub filename_lr: String,
    pub filename_hr: String,
}

impl IndexRow {
    pub fn filename(&self, sampling_rate: u32) -> &str {
        if sampling_rate == 500 {
            &self.filename_hr
        } else {
            &self.filename_lr
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetIndex {
    pub rows: Vec<IndexRow>,
}

impl DatasetIndex {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, ecg_id: u32) -> Option<&IndexRow> {
        self.rows.iter().find(|r| r.ecg_id == ecg_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FoldSplit {
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
}

/// Parses the python-dict rendering PTB-XL stores in `scp_codes`,
/// e.g. `{'NORM': 100.0, 'SR': 0.0}`.
pub fn parse_scp_codes(text: &str) -> Result<ScpCodes, WfdbError> {
    let err = |m: &str| WfdbError::ScpParse(format!("{m} in {text:?}"));
    let inner = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| err("unbalanced braces"))?;
    if inner.contains(['{', '}']) {
        return Err(err("unbalanced braces"));
    }

    let mut codes = ScpCodes::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let quote = rest
            .chars()
            .next()
            .filter(|c| *c == '\'' || *c == '"')
            .ok_or_else(|| err("expected quoted code"))?;
        let body = &rest[1..];
        let close = body.find(quote).ok_or_else(|| err("unterminated code"))?;
        let code = &body[..close];
        if code.is_empty() {
            return Err(err("empty code"));
        }
        rest = body[close + 1..]
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| err("expected ':'"))?;
        let (value_text, tail) = match rest.find(',') {
            Some(i) => (&rest[..i], &rest[i + 1..]),
            None => (rest, ""),
        };
        let value: f64 = value_text.trim().parse().map_err(|_| err("non-numeric confidence"))?;
        if !(0.0..=100.0).contains(&value) {
            return Err(err("confidence outside [0, 100]"));
        }
        if codes.insert(code.to_owned(), value).is_some() {
            return Err(err("duplicate code"));
        }
        rest = tail.trim();
    }
    if codes.is_empty() {
        return Err(err("no codes"));
    }
    Ok(codes)
}

/// Renders codes in the same dict syntax [`parse_scp_codes`] accepts.
pub fn render_scp_codes(codes: &ScpCodes) -> String {
    let mut out = String::from("{");
    for (i, (code, conf)) in codes.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "'{code}': {conf:?}");
    }
    out.push('}');
    out
}

fn parse_int(field: &str, column: &str) -> Result<i64, WfdbError> {
    let t = field.trim();
    t.parse::<i64>()
        .ok()
        .or_else(|| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && v.abs() < 1e15)
                .map(|v| v as i64)
        })
        .ok_or_else(|| WfdbError::SchemaError(format!("{column}: not an integer: {t:?}")))
}

/// Reads `ptbxl_database.csv` contents. Row order is preserved.
pub fn load_index(csv_text: &str) -> Result<DatasetIndex, WfdbError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| WfdbError::SchemaError(e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| WfdbError::SchemaError(format!("missing column {name}")))
    };
    let id_col = column("ecg_id")?;
    let scp_col = column("scp_codes")?;
    let fold_col = column("strat_fold")?;
    let lr_col = column("filename_lr")?;
    let hr_col = column("filename_hr")?;

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| WfdbError::SchemaError(e.to_string()))?;
        let get = |i: usize| record.get(i).unwrap_or_default();

        let ecg_id = parse_int(get(id_col), "ecg_id")?;
        let ecg_id =
            u32::try_from(ecg_id).map_err(|_| WfdbError::SchemaError(format!("ecg_id out of range: {ecg_id}")))?;
        if !seen.insert(ecg_id) {
            return Err(WfdbError::DuplicateRecord(ecg_id));
        }
        let fold = parse_int(get(fold_col), "strat_fold")?;
        if !(1..=10).contains(&fold) {
            return Err(WfdbError::SchemaError(format!(
                "ecg_id {ecg_id}: strat_fold {fold} outside 1..=10"
            )));
        }
        let scp_codes =
            parse_scp_codes(get(scp_col)).map_err(|e| WfdbError::ScpParse(format!("ecg_id {ecg_id}: {e}")))?;

        rows.push(IndexRow {
            ecg_id,
            scp_codes,
            strat_fold: fold as u8,
            filename_lr: get(lr_col).trim().to_owned(),
            filename_hr: get(hr_col).trim().to_owned(),
        });
    }
    Ok(DatasetIndex { rows })
}

/// Folds 1–8 train, fold 9 validation, fold 10 test.
pub fn split_folds(index: &DatasetIndex) -> FoldSplit {
    let mut split = FoldSplit::default();
    for row in &index.rows {
        match row.strat_fold {
            9 => split.val.push(row.ecg_id),
            10 => split.test.push(row.ecg_id),
            _ => split.train.push(row.ecg_id),
        }
    }
    split
}
