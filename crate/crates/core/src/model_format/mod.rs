//! `.ecgm` model container and the f64 training checkpoint.
//!
//! The byte layout is documented in `docs/ecgm-format.md`. Every multi-byte
//! field is little-endian and the file ends with a CRC-32 (IEEE) of all
//! preceding bytes.

mod binary16;
mod checkpoint;
mod codec;

use std::fmt;

use thiserror::Error;

pub use binary16::{f16_to_f32, f32_to_f16, F16_INFINITY, F16_MAX};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use codec::{verify_envelope, Reader, Writer};

use crate::nn::{ModelConfig, ModelParams, Scalar, Tensor};

pub const MAGIC: [u8; 4] = *b"ECGM";
pub const FORMAT_VERSION: u16 = 1;
pub const FILE_EXTENSION: &str = "ecgm";

/// magic + version + dtype + reserved
const PREFIX_LEN: usize = 8;
const CHECKSUM_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelFormatError {
    #[error("not a model file (bad magic)")]
    NotAModelFile,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CorruptFile { stored: u32, computed: u32 },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated at byte {offset}: need {needed} bytes, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("malformed file at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("tensor {tensor} at byte {offset}: declared shape {declared:?}, config implies {expected:?}")]
    ShapeMismatch {
        offset: usize,
        tensor: String,
        declared: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("cannot encode: {0}")]
    EncodeError(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dtype {
    F32,
    F16,
}

impl Dtype {
    pub fn tag(self) -> u8 {
        match self {
            Dtype::F32 => 1,
            Dtype::F16 => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Dtype::F32),
            2 => Some(Dtype::F16),
            _ => None,
        }
    }

    pub fn element_size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F16 => 2,
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dtype::F32 => "float32",
            Dtype::F16 => "float16",
        })
    }
}

/// Decoded parameters, widened to `f32` for compute.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedModel {
    pub config: ModelConfig,
    pub dtype: Dtype,
    pub params: ModelParams<f32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorBytes {
    pub name: String,
    pub descriptor: usize,
    pub payload: usize,
}

/// Byte accounting: `header + payload + checksum == total`, where the
/// header covers everything that is not a payload or the trailer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeReport {
    pub dtype: Dtype,
    pub total: usize,
    /// Fixed prefix, config section and tensor count.
    pub preamble: usize,
    /// `preamble` plus every tensor descriptor.
    pub header: usize,
    pub payload: usize,
    pub checksum: usize,
    pub tensors: Vec<TensorBytes>,
}

/// Serialize `params` under `config`. F16 payloads are the binary16
/// rounding of each value's `f32` form.
pub fn encode_model<T: Scalar>(
    config: &ModelConfig,
    params: &ModelParams<T>,
    dtype: Dtype,
) -> Result<Vec<u8>, ModelFormatError> {
    config
        .validate()
        .map_err(|e| ModelFormatError::EncodeError(e.to_string()))?;
    params
        .check(config)
        .map_err(|e| ModelFormatError::EncodeError(e.to_string()))?;

    let mut w = Writer::default();
    w.bytes(&MAGIC);
    w.u16(FORMAT_VERSION);
    w.u8(dtype.tag());
    w.u8(0);
    w.config(config)?;
    let tensors = params.tensors();
    w.u32(tensors.len() as u32);
    for (t, name) in tensors.iter().zip(config.tensor_names()) {
        w.u8(t.rank() as u8);
        for &d in t.shape() {
            w.dim(d, &name)?;
        }
        for (i, v) in t.data().iter().enumerate() {
            let v = v.as_f64() as f32;
            if !v.is_finite() {
                return Err(ModelFormatError::EncodeError(format!(
                    "{name}[{i}] is not finite at float32"
                )));
            }
            match dtype {
                Dtype::F32 => w.bytes(&v.to_le_bytes()),
                Dtype::F16 => {
                    let h = f32_to_f16(v);
                    if h & 0x7FFF == F16_INFINITY {
                        return Err(ModelFormatError::EncodeError(format!(
                            "{name}[{i}] = {v} exceeds the float16 range"
                        )));
                    }
                    w.u16(h);
                }
            }
        }
    }
    Ok(w.finish())
}

fn parse(bytes: &[u8]) -> Result<(DecodedModel, SizeReport), ModelFormatError> {
    let body = verify_envelope(bytes, &MAGIC, PREFIX_LEN + CHECKSUM_LEN)?;
    let mut r = Reader::new(body, 4);
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(ModelFormatError::UnsupportedVersion(version));
    }
    let at = r.pos;
    let dtype = Dtype::from_tag(r.u8()?).ok_or_else(|| ModelFormatError::Malformed {
        offset: at,
        message: format!("unknown dtype tag {}", body[at]),
    })?;
    let _reserved = r.u8()?;
    let config = r.config()?;

    let shapes = config.tensor_shapes();
    let names = config.tensor_names();
    let at = r.pos;
    let count = r.u32()? as usize;
    if count != shapes.len() {
        return Err(ModelFormatError::Malformed {
            offset: at,
            message: format!("{count} tensors declared, config implies {}", shapes.len()),
        });
    }
    let preamble = r.pos;

    let mut tensors = Vec::with_capacity(count);
    let mut accounting = Vec::with_capacity(count);
    for (shape, name) in shapes.iter().zip(&names) {
        let start = r.pos;
        let n = r.descriptor(name, shape)?;
        let descriptor = r.pos - start;
        let payload_len = n.checked_mul(dtype.element_size()).ok_or(ModelFormatError::Malformed {
            offset: start,
            message: format!("{name}: payload size overflows"),
        })?;
        let payload_at = r.pos;
        let raw = r.take(payload_len)?;
        let data: Vec<f32> = match dtype {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            Dtype::F16 => raw
                .chunks_exact(2)
                .map(|c| f16_to_f32(u16::from_le_bytes(c.try_into().unwrap())))
                .collect(),
        };
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ModelFormatError::Malformed {
                offset: payload_at + i * dtype.element_size(),
                message: format!("{name}[{i}] is not finite"),
            });
        }
        tensors.push(Tensor::from_vec(shape, data).expect("length checked against shape"));
        accounting.push(TensorBytes {
            name: name.clone(),
            descriptor,
            payload: payload_len,
        });
    }
    if r.remaining() != 0 {
        return Err(ModelFormatError::Malformed {
            offset: r.pos,
            message: format!("{} unexpected bytes before the checksum", r.remaining()),
        });
    }
    let params = ModelParams::from_tensors(&config, tensors).expect("shapes checked while reading");
    params.check(&config).map_err(|e| ModelFormatError::Malformed {
        offset: preamble,
        message: e.to_string(),
    })?;

    let payload: usize = accounting.iter().map(|t| t.payload).sum();
    let report = SizeReport {
        dtype,
        total: bytes.len(),
        preamble,
        header: bytes.len() - payload - CHECKSUM_LEN,
        payload,
        checksum: CHECKSUM_LEN,
        tensors: accounting,
    };
    Ok((DecodedModel { config, dtype, params }, report))
}

/// Checks run in order: magic, length, checksum, version, then a single
/// bounds-checked pass over config and tensors.
pub fn decode_model(bytes: &[u8]) -> Result<DecodedModel, ModelFormatError> {
    parse(bytes).map(|(m, _)| m)
}

pub fn size_report(bytes: &[u8]) -> Result<SizeReport, ModelFormatError> {
    parse(bytes).map(|(_, r)| r)
}

/// Re-encode a decoded model at another precision.
pub fn convert(bytes: &[u8], dtype: Dtype) -> Result<Vec<u8>, ModelFormatError> {
    let m = decode_model(bytes)?;
    encode_model(&m.config, &m.params, dtype)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model_forward;

    fn small() -> ModelConfig {
        ModelConfig {
            in_channels: 2,
            input_length: 64,
            conv_filters: vec![3, 3, 4, 4, 5, 5],
            conv_kernels: vec![5, 5, 3, 3, 3, 3],
            dense_hidden: 6,
            ..ModelConfig::default()
        }
    }

    fn trained_like(config: &ModelConfig, seed: u64) -> ModelParams {
        let mut p = ModelParams::init(config, seed);
        for (i, b) in p.blocks.iter_mut().enumerate() {
            b.bn.moving_mean = b.bn.moving_mean.map(|_| 0.01 * i as f64 - 0.02);
            b.bn.moving_var = b.bn.moving_var.map(|_| 0.5 + 0.1 * i as f64);
            b.conv_b = b.conv_b.map(|_| 0.003);
        }
        p
    }

    #[test]
    fn f32_round_trip_is_bit_exact() {
        let c = small();
        let p = trained_like(&c, 3).cast::<f32>();
        let bytes = encode_model(&c, &p, Dtype::F32).unwrap();
        let m = decode_model(&bytes).unwrap();
        assert_eq!(m.config, c);
        assert_eq!(m.dtype, Dtype::F32);
        for (a, b) in m.params.tensors().iter().zip(p.tensors()) {
            assert_eq!(
                a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
        assert_eq!(encode_model(&m.config, &m.params, Dtype::F32).unwrap(), bytes);
    }

    #[test]
    fn f16_round_trip_within_half_ulp() {
        let c = small();
        let p = trained_like(&c, 4);
        let bytes = encode_model(&c, &p, Dtype::F16).unwrap();
        let m = decode_model(&bytes).unwrap();
        for (a, b) in m.params.tensors().iter().zip(p.tensors()) {
            for (&q, &v) in a.data().iter().zip(b.data()) {
                let v32 = v as f32;
                let bound = if v32.abs() < 2f32.powi(-14) {
                    2f32.powi(-25)
                } else {
                    2f32.powi(v32.abs().log2().floor() as i32 - 11)
                };
                assert!((q - v32).abs() <= bound, "{v32} -> {q}");
            }
        }
        assert_eq!(encode_model(&m.config, &m.params, Dtype::F16).unwrap(), bytes);
    }

    #[test]
    fn payload_halves_and_accounting_adds_up() {
        let c = ModelConfig::default();
        let p = ModelParams::init(&c, 1);
        let f32_bytes = encode_model(&c, &p, Dtype::F32).unwrap();
        let f16_bytes = encode_model(&c, &p, Dtype::F16).unwrap();
        let a = size_report(&f32_bytes).unwrap();
        let b = size_report(&f16_bytes).unwrap();
        for r in [&a, &b] {
            assert_eq!(r.header + r.payload + r.checksum, r.total);
            assert_eq!(
                r.preamble + r.tensors.iter().map(|t| t.descriptor + t.payload).sum::<usize>() + 4,
                r.total
            );
            assert!(r.header < 1024, "header {}", r.header);
        }
        assert_eq!(a.payload, 2 * b.payload);
        assert_eq!(a.header, b.header);
        assert!(f32_bytes.len() < 300 * 1024);
        assert!((f16_bytes.len() as f64) < 0.6 * f32_bytes.len() as f64);
    }

    #[test]
    fn loaded_params_predict_identically() {
        let c = small();
        let p = trained_like(&c, 8).cast::<f32>();
        let bytes = encode_model(&c, &p, Dtype::F32).unwrap();
        let loaded = decode_model(&bytes).unwrap().params;
        let x = Tensor::from_vec(
            &[3, 2, 64],
            (0..384).map(|i| ((i * 37 % 101) as f32 - 50.0) / 50.0).collect(),
        )
        .unwrap();
        let a = model_forward(&c, &p, &x).unwrap();
        let b = model_forward(&c, &loaded, &x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn error_order() {
        let c = small();
        let bytes = encode_model(&c, &ModelParams::init(&c, 0), Dtype::F32).unwrap();
        assert_eq!(decode_model(b"PK\x03\x04rest"), Err(ModelFormatError::NotAModelFile));
        assert!(matches!(decode_model(b"ECG"), Err(ModelFormatError::Truncated { .. })));
        assert!(matches!(decode_model(b""), Err(ModelFormatError::Truncated { .. })));

        let mut flipped = bytes.clone();
        let mid = bytes.len() / 2;
        flipped[mid] ^= 0x01;
        assert!(matches!(
            decode_model(&flipped),
            Err(ModelFormatError::CorruptFile { .. })
        ));

        let mut v2 = bytes[..bytes.len() - 4].to_vec();
        v2[4] = 2;
        let crc = crc32fast::hash(&v2);
        v2.extend_from_slice(&crc.to_le_bytes());
        assert_eq!(decode_model(&v2), Err(ModelFormatError::UnsupportedVersion(2)));

        assert!(matches!(
            decode_model(&bytes[..bytes.len() - 1]),
            Err(ModelFormatError::CorruptFile { .. })
        ));
    }

    #[test]
    fn encode_rejects_non_finite_and_f16_overflow() {
        let c = small();
        let mut p = ModelParams::init(&c, 0);
        p.dense2.b.data_mut()[0] = f64::NAN;
        assert!(matches!(
            encode_model(&c, &p, Dtype::F32),
            Err(ModelFormatError::EncodeError(_))
        ));
        p.dense2.b.data_mut()[0] = 1e5;
        assert!(encode_model(&c, &p, Dtype::F32).is_ok());
        assert!(matches!(
            encode_model(&c, &p, Dtype::F16),
            Err(ModelFormatError::EncodeError(_))
        ));
        p.dense2.b.data_mut()[0] = 1e300;
        assert!(matches!(
            encode_model(&c, &p, Dtype::F32),
            Err(ModelFormatError::EncodeError(_))
        ));
    }

    #[test]
    fn deterministic_bytes() {
        let c = small();
        let p = ModelParams::init(&c, 12);
        assert_eq!(
            encode_model(&c, &p, Dtype::F16).unwrap(),
            encode_model(&c, &p, Dtype::F16).unwrap()
        );
        let f32_bytes = encode_model(&c, &p, Dtype::F32).unwrap();
        assert_eq!(
            convert(&f32_bytes, Dtype::F16).unwrap(),
            encode_model(&c, &p, Dtype::F16).unwrap()
        );
    }
}
