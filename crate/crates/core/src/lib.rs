//! ECG classification toolkit for resource-constrained deployment.
//!
//! The crate covers the whole path from PTB-XL style WFDB records to a
//! compact, quantized 1D-CNN model file:
//!
//! ```text
//! .hea/.dat + ptbxl_database.csv
//!   ├─ wfdb        header/format-16 decoding, metadata index, fold splits
//!   ├─ dsp         low-pass → wavelet baseline removal → rolling mean
//!   ├─ labels      SCP code → superclass → normal/abnormal, class weights
//!   ├─ nn          tensors, layers, backprop, Adam, training loop
//!   ├─ model_format  `.ecgm` container (F32 / F16 payloads), checkpoints
//!   └─ eval        confusion matrices, metrics, report plumbing
//! ```
//!
//! Everything is deterministic given a seed. Training runs at `f64`;
//! deployment inference runs at `f32` with optional `f16` storage.

pub mod dsp;
pub mod eval;
pub mod labels;
pub mod model_format;
pub mod nn;
pub mod synthetic;
pub mod wfdb;

mod error;

pub use error::{Error, Result};
