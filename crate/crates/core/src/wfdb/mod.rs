//! PTB-XL on-disk artifacts: WFDB headers, format-16 signal files and the
//! `ptbxl_database.csv` metadata index.
//!
//! Only storage format 16 is supported. Any other format code is rejected.

mod header;
mod index;
mod io;
mod signal;

pub use header::{parse_header, RecordHeader, SignalSpec};
pub use index::{
    load_index, parse_scp_codes, render_scp_codes, split_folds, DatasetIndex, FoldSplit, IndexRow, ScpCodes,
};
pub use io::{read_record, render_index, write_record};
pub use signal::{decode_format16, encode_format16, DecodedRecord, EcgRecord, INVALID_SAMPLE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WfdbError {
    #[error("parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("unsupported WFDB storage format {0} (only format 16 is supported)")]
    UnsupportedFormat(u16),
    #[error("header declares {declared} signals but has {found} signal lines")]
    InconsistentHeader { declared: usize, found: usize },
    #[error("signal file has {actual} bytes, expected {expected}")]
    TruncatedSignal { expected: usize, actual: usize },
    #[error("record has no samples")]
    EmptyRecord,
    #[error("sample value {value} mV on channel {channel} is not representable in format 16")]
    Unrepresentable { channel: usize, value: f64 },
    #[error("scp_codes parse error: {0}")]
    ScpParse(String),
    #[error("metadata schema error: {0}")]
    SchemaError(String),
    #[error("duplicate ecg_id {0}")]
    DuplicateRecord(u32),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// The 12 standard lead names in PTB-XL channel order.
pub const STANDARD_LEADS: [&str; 12] = [
    "I", "II", "III", "AVR", "AVL", "AVF", "V1", "V2", "V3", "V4", "V5", "V6",
];
