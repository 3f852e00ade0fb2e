//! Little-endian primitives shared by the model and checkpoint layouts.

use super::ModelFormatError;
use crate::nn::{ModelConfig, N_CONV_BLOCKS};

/// Largest value accepted for any dimension-like config field.
const MAX_DIM: u32 = 1 << 24;

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn dim(&mut self, v: usize, what: &str) -> Result<(), ModelFormatError> {
        let v = u32::try_from(v)
            .ok()
            .filter(|&v| v <= MAX_DIM)
            .ok_or_else(|| ModelFormatError::EncodeError(format!("{what} = {v} does not fit the format")))?;
        self.u32(v);
        Ok(())
    }

    pub fn config(&mut self, c: &ModelConfig) -> Result<(), ModelFormatError> {
        self.dim(c.in_channels, "in_channels")?;
        self.dim(c.input_length, "input_length")?;
        self.u8(N_CONV_BLOCKS as u8);
        for &f in &c.conv_filters {
            self.dim(f, "conv filter count")?;
        }
        for &k in &c.conv_kernels {
            self.dim(k, "conv kernel size")?;
        }
        self.dim(c.dense_hidden, "dense_hidden")?;
        self.f64(c.leaky_alpha);
        self.f64(c.bn_eps);
        Ok(())
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8], pos: usize) -> Self {
        Self { data, pos }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFormatError> {
        if n > self.remaining() {
            return Err(ModelFormatError::Truncated {
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ModelFormatError> {
        Ok(self.take(N)?.try_into().expect("take returns N bytes"))
    }

    pub fn u8(&mut self) -> Result<u8, ModelFormatError> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16, ModelFormatError> {
        self.array().map(u16::from_le_bytes)
    }
    pub fn u32(&mut self) -> Result<u32, ModelFormatError> {
        self.array().map(u32::from_le_bytes)
    }
    pub fn u64(&mut self) -> Result<u64, ModelFormatError> {
        self.array().map(u64::from_le_bytes)
    }
    pub fn f64(&mut self) -> Result<f64, ModelFormatError> {
        self.array().map(f64::from_le_bytes)
    }

    pub fn dim(&mut self, what: &str) -> Result<usize, ModelFormatError> {
        let at = self.pos;
        let v = self.u32()?;
        if v > MAX_DIM {
            return Err(ModelFormatError::Malformed {
                offset: at,
                message: format!("{what} = {v} is implausibly large"),
            });
        }
        Ok(v as usize)
    }

    pub fn config(&mut self) -> Result<ModelConfig, ModelFormatError> {
        let in_channels = self.dim("in_channels")?;
        let input_length = self.dim("input_length")?;
        let at = self.pos;
        let blocks = self.u8()? as usize;
        if blocks != N_CONV_BLOCKS {
            return Err(ModelFormatError::Malformed {
                offset: at,
                message: format!("{blocks} conv blocks declared, expected {N_CONV_BLOCKS}"),
            });
        }
        let conv_filters = (0..blocks)
            .map(|_| self.dim("conv filter count"))
            .collect::<Result<_, _>>()?;
        let conv_kernels = (0..blocks)
            .map(|_| self.dim("conv kernel size"))
            .collect::<Result<_, _>>()?;
        let dense_hidden = self.dim("dense_hidden")?;
        let config = ModelConfig {
            in_channels,
            input_length,
            conv_filters,
            conv_kernels,
            dense_hidden,
            leaky_alpha: self.f64()?,
            bn_eps: self.f64()?,
        };
        config.validate().map_err(|e| ModelFormatError::Malformed {
            offset: at,
            message: e.to_string(),
        })?;
        Ok(config)
    }

    /// Rank byte and dimensions, checked against the expected shape.
    pub fn descriptor(&mut self, name: &str, expected: &[usize]) -> Result<usize, ModelFormatError> {
        let at = self.pos;
        let rank = self.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(self.u32()? as usize);
        }
        if dims != expected {
            return Err(ModelFormatError::ShapeMismatch {
                offset: at,
                tensor: name.to_string(),
                declared: dims,
                expected: expected.to_vec(),
            });
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(ModelFormatError::Malformed {
                offset: at,
                message: format!("{name}: element count overflows"),
            })
    }
}

/// Split off and verify the CRC trailer, after checking magic and length.
pub(crate) fn verify_envelope<'a>(
    bytes: &'a [u8],
    magic: &[u8; 4],
    min_len: usize,
) -> Result<&'a [u8], ModelFormatError> {
    let prefix = bytes.len().min(4);
    if bytes[..prefix] != magic[..prefix] {
        return Err(ModelFormatError::NotAModelFile);
    }
    if bytes.len() < min_len {
        return Err(ModelFormatError::Truncated {
            offset: 0,
            needed: min_len,
            available: bytes.len(),
        });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4-byte trailer"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ModelFormatError::CorruptFile { stored, computed });
    }
    Ok(body)
}
