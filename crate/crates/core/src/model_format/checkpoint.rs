//! Full-precision training checkpoint: every parameter at f64, the Adam
//! moments and step counter, the training config and the loss history.

use super::codec::{verify_envelope, Reader, Writer};
use super::ModelFormatError;
use crate::labels::ClassWeights;
use crate::nn::{AdamState, EpochRecord, History, ModelConfig, ModelParams, Tensor, TrainConfig};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"ECGC";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub train: TrainConfig,
    pub params: ModelParams,
    pub adam: AdamState,
    pub history: History,
}

fn write_tensor(w: &mut Writer, t: &Tensor) -> Result<(), ModelFormatError> {
    w.u8(t.rank() as u8);
    for &d in t.shape() {
        w.dim(d, "tensor dimension")?;
    }
    for v in t.data() {
        w.f64(*v);
    }
    Ok(())
}

fn read_tensor(r: &mut Reader, name: &str, shape: &[usize]) -> Result<Tensor, ModelFormatError> {
    let n = r.descriptor(name, shape)?;
    let bytes = n.checked_mul(8).ok_or(ModelFormatError::Malformed {
        offset: r.pos,
        message: format!("{name}: payload size overflows"),
    })?;
    let raw = r.take(bytes)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tensor::from_vec(shape, data).expect("length checked against shape"))
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn unopt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>, ModelFormatError> {
    ck.params
        .check(&ck.config)
        .map_err(|e| ModelFormatError::EncodeError(e.to_string()))?;
    let trainable = ck.params.trainable();
    if ck.adam.m.len() != trainable.len()
        || ck.adam.v.len() != trainable.len()
        || ck
            .adam
            .m
            .iter()
            .zip(&ck.adam.v)
            .zip(&trainable)
            .any(|((m, v), p)| m.shape() != p.shape() || v.shape() != p.shape())
    {
        return Err(ModelFormatError::EncodeError(
            "Adam moments do not match the parameters".into(),
        ));
    }

    let mut w = Writer::default();
    w.bytes(&CHECKPOINT_MAGIC);
    w.u16(CHECKPOINT_VERSION);
    w.u16(0);
    w.config(&ck.config)?;

    let tc = &ck.train;
    w.dim(tc.epochs, "epochs")?;
    w.dim(tc.batch_size, "batch_size")?;
    for v in [
        tc.learning_rate,
        tc.adam_beta1,
        tc.adam_beta2,
        tc.adam_eps,
        tc.bn_momentum,
    ] {
        w.f64(v);
    }
    w.u64(tc.seed);
    let cw = tc.class_weights;
    w.u8(cw.is_some() as u8);
    w.f64(cw.map_or(0.0, |c| c.weight_normal));
    w.f64(cw.map_or(0.0, |c| c.weight_abnormal));

    let tensors = ck.params.tensors();
    w.u32(tensors.len() as u32);
    for t in tensors {
        write_tensor(&mut w, t)?;
    }
    w.u64(ck.adam.t);
    for t in ck.adam.m.iter().chain(&ck.adam.v) {
        write_tensor(&mut w, t)?;
    }

    w.u32(ck.history.epochs.len() as u32);
    for e in &ck.history.epochs {
        w.dim(e.epoch, "epoch")?;
        w.f64(e.train_loss);
        w.f64(opt(e.val_loss));
        w.f64(opt(e.val_accuracy));
    }
    Ok(w.finish())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, ModelFormatError> {
    let body = verify_envelope(bytes, &CHECKPOINT_MAGIC, 12)?;
    let mut r = Reader::new(body, 4);
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelFormatError::UnsupportedVersion(version));
    }
    let _reserved = r.u16()?;
    let config = r.config()?;

    let epochs = r.dim("epochs")?;
    let batch_size = r.dim("batch_size")?;
    let [learning_rate, adam_beta1, adam_beta2, adam_eps, bn_momentum] =
        [r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?];
    let seed = r.u64()?;
    let has_weights = r.u8()? != 0;
    let (wn, wa) = (r.f64()?, r.f64()?);
    let train = TrainConfig {
        epochs,
        batch_size,
        learning_rate,
        adam_beta1,
        adam_beta2,
        adam_eps,
        bn_momentum,
        seed,
        class_weights: has_weights.then_some(ClassWeights {
            weight_normal: wn,
            weight_abnormal: wa,
        }),
    };

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
    let tensors = shapes
        .iter()
        .zip(&names)
        .map(|(s, n)| read_tensor(&mut r, n, s))
        .collect::<Result<Vec<_>, _>>()?;
    let params = ModelParams::from_tensors(&config, tensors).expect("shapes checked while reading");

    let t = r.u64()?;
    let trainable_shapes: Vec<Vec<usize>> = params.trainable().iter().map(|t| t.shape().to_vec()).collect();
    let mut moments = Vec::with_capacity(2 * trainable_shapes.len());
    for (i, s) in trainable_shapes.iter().chain(&trainable_shapes).enumerate() {
        moments.push(read_tensor(&mut r, &format!("adam moment {i}"), s)?);
    }
    let v = moments.split_off(trainable_shapes.len());
    let adam = AdamState { m: moments, v, t };

    let n_epochs = r.u32()? as usize;
    if n_epochs.saturating_mul(28) > r.remaining() {
        return Err(ModelFormatError::Truncated {
            offset: r.pos,
            needed: n_epochs.saturating_mul(28),
            available: r.remaining(),
        });
    }
    let mut history = History::default();
    for _ in 0..n_epochs {
        history.epochs.push(EpochRecord {
            epoch: r.u32()? as usize,
            train_loss: r.f64()?,
            val_loss: unopt(r.f64()?),
            val_accuracy: unopt(r.f64()?),
        });
    }
    if r.remaining() != 0 {
        return Err(ModelFormatError::Malformed {
            offset: r.pos,
            message: format!("{} unexpected bytes before the checksum", r.remaining()),
        });
    }
    Ok(Checkpoint {
        config,
        train,
        params,
        adam,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let config = ModelConfig::with_channels(3);
        let params = ModelParams::init(&config, 2);
        let mut adam = AdamState::new(&params);
        adam.t = 17;
        adam.m[3].data_mut()[0] = 0.25;
        let ck = Checkpoint {
            config,
            train: TrainConfig {
                seed: 99,
                class_weights: Some(ClassWeights {
                    weight_normal: 1.25,
                    weight_abnormal: 0.8,
                }),
                ..TrainConfig::default()
            },
            params,
            adam,
            history: History {
                epochs: vec![
                    EpochRecord {
                        epoch: 1,
                        train_loss: 0.7,
                        val_loss: Some(0.69),
                        val_accuracy: None,
                    },
                    EpochRecord {
                        epoch: 2,
                        train_loss: 0.5,
                        val_loss: Some(0.6),
                        val_accuracy: Some(0.7),
                    },
                ],
            },
        };
        let bytes = encode_checkpoint(&ck).unwrap();
        assert_eq!(decode_checkpoint(&bytes).unwrap(), ck);
        let mut bad = bytes.clone();
        bad[40] ^= 0x80;
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(ModelFormatError::CorruptFile { .. })
        ));
        assert_eq!(decode_checkpoint(b"ECGM...."), Err(ModelFormatError::NotAModelFile));
    }
}
