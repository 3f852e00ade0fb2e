use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::weighted_bce;
use super::{adam_step, model_forward, AdamState, Mode, ModelConfig, ModelParams, Network, NnError, Tensor};
use crate::labels::ClassWeights;

/// Rows scored per eval-mode forward pass during validation.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub bn_momentum: f64,
    /// Drives weight init and the per-epoch shuffle.
    pub seed: u64,
    /// `None` derives `N / (2 N_c)` from the training labels.
    pub class_weights: Option<ClassWeights>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-7,
            bn_momentum: 0.99,
            seed: 0,
            class_weights: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad("bn_momentum must lie in [0, 1]");
        }
        if let Some(w) = self.class_weights {
            if !(w.weight_normal > 0.0 && w.weight_abnormal > 0.0) {
                return bad("class weights must be positive");
            }
        }
        Ok(())
    }
}

/// Inputs `[n × channels × length]` with 0/1 targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub inputs: Tensor,
    pub labels: Vec<f64>,
}

impl LabeledSet {
    pub fn new(inputs: Tensor, labels: Vec<f64>) -> Result<Self, NnError> {
        inputs.expect_rank(3, "labeled set")?;
        if inputs.shape()[0] != labels.len() {
            return Err(NnError::ShapeError(format!(
                "{} inputs but {} labels",
                inputs.shape()[0],
                labels.len()
            )));
        }
        if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(NnError::ShapeError(format!("label {y} is not 0 or 1")));
        }
        Ok(Self { inputs, labels })
    }

    /// Build from per-sample `channels × length` arrays.
    pub fn from_samples(samples: &[Vec<Vec<f64>>], labels: Vec<f64>) -> Result<Self, NnError> {
        let channels = samples.first().map_or(0, |s| s.len());
        let length = samples.first().and_then(|s| s.first()).map_or(0, |c| c.len());
        let mut data = Vec::with_capacity(samples.len() * channels * length);
        for (i, s) in samples.iter().enumerate() {
            if s.len() != channels || s.iter().any(|c| c.len() != length) {
                return Err(NnError::ShapeError(format!("sample {i} is not {channels} × {length}")));
            }
            s.iter().for_each(|c| data.extend_from_slice(c));
        }
        Self::new(Tensor::from_vec(&[samples.len(), channels, length], data)?, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_width(&self) -> usize {
        self.inputs.shape()[1] * self.inputs.shape()[2]
    }

    /// Copy the given rows into a new batch tensor.
    pub fn gather(&self, rows: &[usize]) -> Tensor {
        let w = self.sample_width();
        let mut data = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            data.extend_from_slice(&self.inputs.data()[r * w..(r + 1) * w]);
        }
        let s = self.inputs.shape();
        Tensor::from_vec(&[rows.len(), s[1], s[2]], data).expect("row copy matches shape")
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            inputs: self.gather(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let abnormal = self.labels.iter().filter(|&&y| y == 1.0).count();
        (self.len() - abnormal, abnormal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_accuracy\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                e.epoch,
                e.train_loss,
                opt(e.val_loss),
                opt(e.val_accuracy)
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: History,
    pub adam: AdamState,
    pub class_weights: ClassWeights,
}

/// Index batches for one epoch. A trailing batch of one sample is folded
/// into its predecessor since train-mode batch norm needs two.
fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() >= 2 && out.last().map(|b| b.len()) == Some(1) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        *out.last_mut().unwrap() = &order[start..];
    }
    out
}

/// Unweighted loss and accuracy at the 0.5 threshold, eval mode.
pub(crate) fn score(config: &ModelConfig, params: &ModelParams, set: &LabeledSet) -> Result<(f64, f64), NnError> {
    let mut probs = Vec::with_capacity(set.len());
    let rows: Vec<usize> = (0..set.len()).collect();
    for chunk in rows.chunks(EVAL_CHUNK) {
        probs.extend(model_forward(config, params, &set.gather(chunk))?);
    }
    let loss = weighted_bce(&probs, &set.labels, 1.0, 1.0);
    let correct = probs
        .iter()
        .zip(&set.labels)
        .filter(|(&p, &y)| (p >= 0.5) == (y == 1.0))
        .count();
    Ok((loss, correct as f64 / set.len() as f64))
}

/// Seeded minibatch training: per-epoch reshuffle, train-mode forward,
/// weighted BCE, backward, Adam.
pub fn train_model(
    train: &LabeledSet,
    val: Option<&LabeledSet>,
    config: &ModelConfig,
    tc: &TrainConfig,
) -> Result<TrainOutcome, NnError> {
    config.validate()?;
    tc.validate()?;
    let (normal, abnormal) = train.class_counts();
    if normal == 0 || abnormal == 0 {
        return Err(NnError::DegenerateDistribution { normal, abnormal });
    }
    let weights = tc.class_weights.unwrap_or(ClassWeights {
        weight_normal: train.len() as f64 / (2.0 * normal as f64),
        weight_abnormal: train.len() as f64 / (2.0 * abnormal as f64),
    });

    let mut net = Network::new(config.clone(), ModelParams::init(config, tc.seed), tc.bn_momentum)?;
    let mut adam = AdamState::new(&net.params);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in batches(&order, tc.batch_size) {
            let x = train.gather(batch);
            let y: Vec<f64> = batch.iter().map(|&i| train.labels[i]).collect();
            net.forward(&x, Mode::Train)?;
            let (loss, grads) = net.backward(&y, weights)?;
            adam_step(&mut net.params, &grads, &mut adam, tc)?;
            total += loss * batch.len() as f64;
        }
        let (val_loss, val_accuracy) = match val {
            Some(v) if !v.is_empty() => {
                let (l, a) = score(config, &net.params, v)?;
                (Some(l), Some(a))
            }
            _ => (None, None),
        };
        let record = EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            val_loss,
            val_accuracy,
        };
        log::info!(
            "epoch {epoch}/{}: train_loss {:.5} val_loss {:?} val_accuracy {:?}",
            tc.epochs,
            record.train_loss,
            val_loss,
            val_accuracy
        );
        history.epochs.push(record);
    }

    Ok(TrainOutcome {
        params: net.into_params(),
        history,
        adam,
        class_weights: weights,
    })
}
