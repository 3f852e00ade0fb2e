use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::layers::{
    batchnorm_backward, batchnorm_eval, batchnorm_train, conv1d_backward, conv1d_forward, dense_backward,
    dense_forward, leaky_relu_backward, leaky_relu_tensor, maxpool1d_backward, maxpool1d_forward, sigmoid,
    weighted_bce, weighted_bce_logit_grad, BatchNormCache, BatchNormParams,
};
use super::{NnError, Scalar, Tensor};
use crate::labels::ClassWeights;

pub const N_CONV_BLOCKS: usize = 6;
pub const POOL_SIZE: usize = 2;

/// Standard deviation of a unit normal truncated at ±2.
const TRUNC_NORMAL_STD: f64 = 0.879_625_661_034_239_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub input_length: usize,
    pub conv_filters: Vec<usize>,
    pub conv_kernels: Vec<usize>,
    pub leaky_alpha: f64,
    pub dense_hidden: usize,
    pub bn_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 12,
            input_length: 1000,
            conv_filters: vec![16, 16, 32, 32, 64, 64],
            conv_kernels: vec![7, 7, 5, 5, 3, 3],
            leaky_alpha: 0.3,
            dense_hidden: 32,
            bn_eps: 1e-3,
        }
    }
}

impl ModelConfig {
    pub fn with_channels(in_channels: usize) -> Self {
        Self {
            in_channels,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::InvalidConfig(m));
        if self.in_channels == 0 {
            return bad("in_channels must be at least 1".into());
        }
        if self.conv_filters.len() != N_CONV_BLOCKS || self.conv_kernels.len() != N_CONV_BLOCKS {
            return bad(format!(
                "conv_filters and conv_kernels need exactly {N_CONV_BLOCKS} entries, got {} and {}",
                self.conv_filters.len(),
                self.conv_kernels.len()
            ));
        }
        if self.conv_filters.contains(&0) {
            return bad("conv_filters entries must be positive".into());
        }
        if let Some(k) = self.conv_kernels.iter().find(|&&k| k % 2 == 0) {
            return bad(format!("conv kernel size {k} must be odd"));
        }
        if self.input_length < POOL_SIZE.pow(N_CONV_BLOCKS as u32) {
            return bad(format!("input_length {} is below 64", self.input_length));
        }
        if self.dense_hidden == 0 {
            return bad("dense_hidden must be positive".into());
        }
        if !self.leaky_alpha.is_finite() {
            return bad("leaky_alpha must be finite".into());
        }
        if !(self.bn_eps.is_finite() && self.bn_eps > 0.0) {
            return bad("bn_eps must be positive".into());
        }
        Ok(())
    }

    /// Sequence length entering each block, then after the last pool.
    pub fn block_lengths(&self) -> Vec<usize> {
        let mut lengths = vec![self.input_length];
        for _ in 0..N_CONV_BLOCKS {
            lengths.push(lengths.last().unwrap() / POOL_SIZE);
        }
        lengths
    }

    pub fn flatten_width(&self) -> usize {
        self.block_lengths()[N_CONV_BLOCKS] * self.conv_filters[N_CONV_BLOCKS - 1]
    }

    fn block_in_channels(&self, block: usize) -> usize {
        if block == 0 {
            self.in_channels
        } else {
            self.conv_filters[block - 1]
        }
    }

    /// Shapes of every stored tensor in canonical order.
    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        for b in 0..N_CONV_BLOCKS {
            let (k, cin, cout) = (self.conv_kernels[b], self.block_in_channels(b), self.conv_filters[b]);
            shapes.push(vec![k, cin, cout]);
            shapes.extend(std::iter::repeat_n(vec![cout], 5));
        }
        shapes.push(vec![self.flatten_width(), self.dense_hidden]);
        shapes.push(vec![self.dense_hidden]);
        shapes.push(vec![self.dense_hidden, 1]);
        shapes.push(vec![1]);
        shapes
    }

    /// Names matching [`ModelConfig::tensor_shapes`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for b in 1..=N_CONV_BLOCKS {
            for part in [
                "conv_w",
                "conv_b",
                "bn_gamma",
                "bn_beta",
                "bn_moving_mean",
                "bn_moving_var",
            ] {
                names.push(format!("block{b}.{part}"));
            }
        }
        for part in ["dense1.w", "dense1.b", "dense2.w", "dense2.b"] {
            names.push(part.to_string());
        }
        names
    }

    /// Number of trainable scalars (moving statistics excluded).
    pub fn trainable_count(&self) -> usize {
        let shapes = self.tensor_shapes();
        shapes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i >= 6 * N_CONV_BLOCKS || i % 6 < 4)
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<T = f64> {
    pub conv_w: Tensor<T>,
    pub conv_b: Tensor<T>,
    pub bn: BatchNormParams<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T = f64> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f64> {
    pub blocks: Vec<ConvBlock<T>>,
    pub dense1: DenseLayer<T>,
    pub dense2: DenseLayer<T>,
}

fn he_truncated(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let std = (2.0 / fan_in as f64).sqrt() / TRUNC_NORMAL_STD;
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= 2.0 {
                break z * std;
            }
        })
        .collect();
    Tensor::from_vec(shape, data).expect("shape product matches")
}

impl<T: Scalar> ModelParams<T> {
    /// Zero weights and biases, identity batch norm.
    pub fn blank(config: &ModelConfig) -> Self {
        let shapes = config.tensor_shapes();
        let tensors = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let is_bn_one = i < 6 * N_CONV_BLOCKS && matches!(i % 6, 2 | 5);
                if is_bn_one {
                    Tensor::filled(s, T::one())
                } else {
                    Tensor::zeros(s)
                }
            })
            .collect();
        Self::from_tensors(config, tensors).expect("blank shapes come from the config")
    }

    /// Rebuild from tensors in canonical order, checking every shape.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Tensor<T>>) -> Result<Self, NnError> {
        let shapes = config.tensor_shapes();
        let names = config.tensor_names();
        if tensors.len() != shapes.len() {
            return Err(NnError::ShapeError(format!(
                "expected {} tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for ((t, s), name) in tensors.iter().zip(&shapes).zip(&names) {
            if t.shape() != s.as_slice() {
                return Err(NnError::ShapeError(format!(
                    "{name}: shape {:?}, expected {s:?}",
                    t.shape()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().unwrap();
        let mut blocks = Vec::with_capacity(N_CONV_BLOCKS);
        for _ in 0..N_CONV_BLOCKS {
            blocks.push(ConvBlock {
                conv_w: next(),
                conv_b: next(),
                bn: BatchNormParams {
                    gamma: next(),
                    beta: next(),
                    moving_mean: next(),
                    moving_var: next(),
                },
            });
        }
        let dense1 = DenseLayer { w: next(), b: next() };
        let dense2 = DenseLayer { w: next(), b: next() };
        Ok(Self { blocks, dense1, dense2 })
    }

    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend([
                &b.conv_w,
                &b.conv_b,
                &b.bn.gamma,
                &b.bn.beta,
                &b.bn.moving_mean,
                &b.bn.moving_var,
            ]);
        }
        out.extend([&self.dense1.w, &self.dense1.b, &self.dense2.w, &self.dense2.b]);
        out
    }

    pub fn into_tensors(self) -> Vec<Tensor<T>> {
        let mut out = Vec::new();
        for b in self.blocks {
            out.extend([
                b.conv_w,
                b.conv_b,
                b.bn.gamma,
                b.bn.beta,
                b.bn.moving_mean,
                b.bn.moving_var,
            ]);
        }
        out.extend([self.dense1.w, self.dense1.b, self.dense2.w, self.dense2.b]);
        out
    }

    /// Trainable tensors: per block conv w/b and BN gamma/beta, then dense.
    pub fn trainable(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend([&b.conv_w, &b.conv_b, &b.bn.gamma, &b.bn.beta]);
        }
        out.extend([&self.dense1.w, &self.dense1.b, &self.dense2.w, &self.dense2.b]);
        out
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.extend([&mut b.conv_w, &mut b.conv_b, &mut b.bn.gamma, &mut b.bn.beta]);
        }
        out.extend([
            &mut self.dense1.w,
            &mut self.dense1.b,
            &mut self.dense2.w,
            &mut self.dense2.b,
        ]);
        out
    }

    pub fn check(&self, config: &ModelConfig) -> Result<(), NnError> {
        if self.blocks.len() != N_CONV_BLOCKS {
            return Err(NnError::ShapeError(format!(
                "{} conv blocks, expected 6",
                self.blocks.len()
            )));
        }
        for ((t, s), name) in self
            .tensors()
            .iter()
            .zip(config.tensor_shapes())
            .zip(config.tensor_names())
        {
            if t.shape() != s.as_slice() {
                return Err(NnError::ShapeError(format!(
                    "{name}: shape {:?}, expected {s:?}",
                    t.shape()
                )));
            }
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.bn.moving_var.data().iter().any(|v| *v < T::zero()) {
                return Err(NnError::ShapeError(format!("block{}: negative moving variance", i + 1)));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let cast_bn = |bn: &BatchNormParams<T>| BatchNormParams {
            gamma: bn.gamma.cast(),
            beta: bn.beta.cast(),
            moving_mean: bn.moving_mean.cast(),
            moving_var: bn.moving_var.cast(),
        };
        ModelParams {
            blocks: self
                .blocks
                .iter()
                .map(|b| ConvBlock {
                    conv_w: b.conv_w.cast(),
                    conv_b: b.conv_b.cast(),
                    bn: cast_bn(&b.bn),
                })
                .collect(),
            dense1: DenseLayer {
                w: self.dense1.w.cast(),
                b: self.dense1.b.cast(),
            },
            dense2: DenseLayer {
                w: self.dense2.w.cast(),
                b: self.dense2.b.cast(),
            },
        }
    }
}

impl ModelParams<f64> {
    /// Truncated-normal fan-in weights, zero biases, identity batch norm.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::blank(config);
        for (b, block) in p.blocks.iter_mut().enumerate() {
            let shape = block.conv_w.shape().to_vec();
            block.conv_w = he_truncated(&shape, config.conv_kernels[b] * config.block_in_channels(b), &mut rng);
        }
        p.dense1.w = he_truncated(
            &[config.flatten_width(), config.dense_hidden],
            config.flatten_width(),
            &mut rng,
        );
        p.dense2.w = he_truncated(&[config.dense_hidden, 1], config.dense_hidden, &mut rng);
        p
    }
}

fn stage(name: String) -> impl FnOnce(NnError) -> NnError {
    move |e| match e {
        NnError::ShapeError(m) => NnError::ShapeError(format!("{name}: {m}")),
        other => other,
    }
}

fn check_input<T: Scalar>(config: &ModelConfig, x: &Tensor<T>) -> Result<usize, NnError> {
    let s = x.shape();
    if s.len() != 3 || s[1] != config.in_channels || s[2] != config.input_length || s[0] == 0 {
        return Err(NnError::ShapeError(format!(
            "input: shape {s:?}, expected [batch, {}, {}]",
            config.in_channels, config.input_length
        )));
    }
    Ok(s[0])
}

/// Eval-mode forward pass returning one probability per batch row.
pub fn model_forward<T: Scalar>(
    config: &ModelConfig,
    params: &ModelParams<T>,
    x: &Tensor<T>,
) -> Result<Vec<T>, NnError> {
    let batch = check_input(config, x)?;
    let mut h = x.clone();
    for (i, block) in params.blocks.iter().enumerate() {
        let n = i + 1;
        h = conv1d_forward(&h, &block.conv_w, &block.conv_b).map_err(stage(format!("block{n} conv")))?;
        h = batchnorm_eval(&h, &block.bn, config.bn_eps).map_err(stage(format!("block{n} batchnorm")))?;
        h = leaky_relu_tensor(&h, config.leaky_alpha);
        h = maxpool1d_forward(&h).map_err(stage(format!("block{n} maxpool")))?.0;
    }
    let width = h.len() / batch;
    let flat = h.reshape(&[batch, width])?;
    let z1 = dense_forward(&flat, &params.dense1.w, &params.dense1.b).map_err(stage("dense1".into()))?;
    let hidden = leaky_relu_tensor(&z1, config.leaky_alpha);
    let logits = dense_forward(&hidden, &params.dense2.w, &params.dense2.b).map_err(stage("dense2".into()))?;
    Ok(logits.data().iter().map(|&z| sigmoid(z)).collect())
}

/// Eval-mode probabilities; thresholding is left to the caller.
pub fn predict<T: Scalar>(config: &ModelConfig, params: &ModelParams<T>, x: &Tensor<T>) -> Result<Vec<T>, NnError> {
    model_forward(config, params, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Gradients of the loss in [`ModelParams::trainable`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.is_finite())
    }
}

/// Branch decisions taken by the last train-mode forward pass. A finite
/// difference step that changes this straddles a kink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern {
    pub negative: Vec<bool>,
    pub argmax: Vec<usize>,
}

struct BlockCache {
    input: Tensor,
    bn: BatchNormCache,
    pre_activation: Tensor,
    pool_input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

struct ForwardCache {
    blocks: Vec<BlockCache>,
    flat: Tensor,
    z1: Tensor,
    hidden: Tensor,
    probs: Vec<f64>,
}

/// Training-time wrapper: train-mode forward passes cache what the
/// backward pass needs.
pub struct Network {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub bn_momentum: f64,
    cache: Option<ForwardCache>,
}

impl Network {
    pub fn new(config: ModelConfig, params: ModelParams, bn_momentum: f64) -> Result<Self, NnError> {
        config.validate()?;
        params.check(&config)?;
        Ok(Self {
            config,
            params,
            bn_momentum,
            cache: None,
        })
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    /// Train mode updates the moving statistics and fills the cache; eval
    /// mode leaves both untouched apart from dropping any stale cache.
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Vec<f64>, NnError> {
        self.cache = None;
        if mode == Mode::Eval {
            return model_forward(&self.config, &self.params, x);
        }
        let batch = check_input(&self.config, x)?;
        let (alpha, eps) = (self.config.leaky_alpha, self.config.bn_eps);
        let mut h = x.clone();
        let mut blocks = Vec::with_capacity(N_CONV_BLOCKS);
        for (i, block) in self.params.blocks.iter_mut().enumerate() {
            let n = i + 1;
            let conv = conv1d_forward(&h, &block.conv_w, &block.conv_b).map_err(stage(format!("block{n} conv")))?;
            let (pre, bn) = batchnorm_train(&conv, &mut block.bn, self.bn_momentum, eps)
                .map_err(stage(format!("block{n} batchnorm")))?;
            let act = leaky_relu_tensor(&pre, alpha);
            let (pooled, argmax) = maxpool1d_forward(&act).map_err(stage(format!("block{n} maxpool")))?;
            blocks.push(BlockCache {
                input: std::mem::replace(&mut h, pooled),
                bn,
                pre_activation: pre,
                pool_input_shape: act.shape().to_vec(),
                argmax,
            });
        }
        let width = h.len() / batch;
        let flat = h.reshape(&[batch, width])?;
        let p = &self.params;
        let z1 = dense_forward(&flat, &p.dense1.w, &p.dense1.b).map_err(stage("dense1".into()))?;
        let hidden = leaky_relu_tensor(&z1, alpha);
        let logits = dense_forward(&hidden, &p.dense2.w, &p.dense2.b).map_err(stage("dense2".into()))?;
        let probs: Vec<f64> = logits.data().iter().map(|&z| sigmoid(z)).collect();
        self.cache = Some(ForwardCache {
            blocks,
            flat,
            z1,
            hidden,
            probs: probs.clone(),
        });
        Ok(probs)
    }

    pub fn activation_pattern(&self) -> Option<ActivationPattern> {
        let cache = self.cache.as_ref()?;
        let mut negative = Vec::new();
        let mut argmax = Vec::new();
        for b in &cache.blocks {
            negative.extend(b.pre_activation.data().iter().map(|v| *v < 0.0));
            argmax.extend_from_slice(&b.argmax);
        }
        negative.extend(cache.z1.data().iter().map(|v| *v < 0.0));
        Some(ActivationPattern { negative, argmax })
    }

    /// Weighted BCE of the cached forward pass and its exact gradients.
    pub fn backward(&self, labels: &[f64], weights: ClassWeights) -> Result<(f64, Gradients), NnError> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| NnError::StateError("backward called without a cached train-mode forward pass".into()))?;
        if labels.len() != cache.probs.len() {
            return Err(NnError::ShapeError(format!(
                "{} labels for a batch of {}",
                labels.len(),
                cache.probs.len()
            )));
        }
        let (wn, wa) = (weights.weight_normal, weights.weight_abnormal);
        let loss = weighted_bce(&cache.probs, labels, wn, wa);
        let batch = labels.len();
        let alpha = self.config.leaky_alpha;
        let p = &self.params;

        let dlogit = Tensor::from_vec(&[batch, 1], weighted_bce_logit_grad(&cache.probs, labels, wn, wa))?;
        let d2 = dense_backward(&cache.hidden, &p.dense2.w, &dlogit)?;
        let dz1 = leaky_relu_backward(&cache.z1, &d2.dx, alpha);
        let d1 = dense_backward(&cache.flat, &p.dense1.w, &dz1)?;

        let last = cache.blocks.last().expect("six blocks");
        let last_shape = [
            batch,
            *last.pool_input_shape.get(1).unwrap(),
            last.pool_input_shape[2] / POOL_SIZE,
        ];
        let mut dh = d1.dx.reshape(&last_shape)?;
        let mut block_grads = Vec::with_capacity(N_CONV_BLOCKS);
        for (block, bc) in p.blocks.iter().zip(&cache.blocks).rev() {
            let dact = maxpool1d_backward(&dh, &bc.argmax, &bc.pool_input_shape)?;
            let dpre = leaky_relu_backward(&bc.pre_activation, &dact, alpha);
            let bn = batchnorm_backward(&dpre, &bc.bn, &block.bn.gamma)?;
            let conv = conv1d_backward(&bc.input, &block.conv_w, &bn.dx)?;
            dh = conv.dx;
            block_grads.push([conv.dw, conv.db, bn.dgamma, bn.dbeta]);
        }
        let mut tensors: Vec<Tensor> = block_grads.into_iter().rev().flatten().collect();
        tensors.extend([d1.dw, d1.db, d2.dw, d2.db]);
        Ok((loss, Gradients { tensors }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn default_shape_chain() {
        let c = ModelConfig::default();
        assert_eq!(c.block_lengths(), vec![1000, 500, 250, 125, 62, 31, 15]);
        assert_eq!(c.flatten_width(), 960);
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig::default();
        c.conv_kernels[2] = 4;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.conv_filters.pop();
        assert!(c.validate().is_err());
        let c = ModelConfig {
            input_length: 63,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn probabilities_in_open_interval_and_deterministic() {
        let c = ModelConfig::with_channels(3);
        let p = ModelParams::init(&c, 7);
        let x = random_input(&[3, 3, 1000], 1);
        let a = model_forward(&c, &p, &x).unwrap();
        let b = model_forward(&c, &ModelParams::init(&c, 7), &x).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn wrong_input_shape_names_stage() {
        let c = ModelConfig::with_channels(1);
        let p = ModelParams::init(&c, 0);
        let err = model_forward(&c, &p, &Tensor::zeros(&[1, 2, 1000])).unwrap_err();
        assert!(matches!(err, NnError::ShapeError(m) if m.starts_with("input")));
        let mut p2 = p.clone();
        p2.blocks[3].conv_w = Tensor::zeros(&[5, 31, 32]);
        let err = model_forward(&c, &p2, &Tensor::zeros(&[1, 1, 1000])).unwrap_err();
        assert!(matches!(err, NnError::ShapeError(m) if m.starts_with("block4 conv")),);
    }

    #[test]
    fn eval_is_batch_independent() {
        let c = ModelConfig::with_channels(2);
        let p = ModelParams::init(&c, 3);
        let x = random_input(&[8, 2, 1000], 9);
        let all = predict(&c, &p, &x).unwrap();
        for i in [0, 5] {
            let row = Tensor::from_vec(&[1, 2, 1000], x.data()[i * 2000..(i + 1) * 2000].to_vec()).unwrap();
            assert_eq!(predict(&c, &p, &row).unwrap()[0].to_bits(), all[i].to_bits());
        }
    }

    #[test]
    fn network_eval_equals_model_forward() {
        let c = ModelConfig::with_channels(1);
        let p = ModelParams::init(&c, 11);
        let x = random_input(&[2, 1, 1000], 2);
        let mut net = Network::new(c.clone(), p.clone(), 0.99).unwrap();
        assert_eq!(net.forward(&x, Mode::Eval).unwrap(), model_forward(&c, &p, &x).unwrap());
        assert_eq!(net.params, p);
    }

    #[test]
    fn backward_without_cache_is_state_error() {
        let c = ModelConfig::with_channels(1);
        let net = Network::new(c.clone(), ModelParams::init(&c, 0), 0.99).unwrap();
        assert!(matches!(
            net.backward(&[1.0], ClassWeights::UNIFORM),
            Err(NnError::StateError(_))
        ));
    }

    #[test]
    fn zero_input_zero_weights() {
        let c = ModelConfig {
            in_channels: 2,
            input_length: 64,
            ..ModelConfig::default()
        };
        let mut net = Network::new(c.clone(), ModelParams::blank(&c), 0.99).unwrap();
        let probs = net.forward(&Tensor::zeros(&[2, 2, 64]), Mode::Train).unwrap();
        assert_eq!(probs, vec![0.5, 0.5]);
        let (loss, g) = net.backward(&[1.0, 0.0], ClassWeights::UNIFORM).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        for b in 0..N_CONV_BLOCKS {
            assert!(
                g.tensors[4 * b].data().iter().all(|v| *v == 0.0),
                "conv w grad block {b}"
            );
        }
        // p − y = ±0.5 cancels across the batch for the output bias...
        assert_eq!(g.tensors.last().unwrap().data(), &[0.0]);
        // ...but not once the classes are weighted differently.
        let w = ClassWeights {
            weight_normal: 1.0,
            weight_abnormal: 3.0,
        };
        let (_, g) = net.backward(&[1.0, 0.0], w).unwrap();
        assert!((g.tensors.last().unwrap().data()[0] - (-0.5 * 3.0 + 0.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_order_round_trip() {
        let c = ModelConfig::with_channels(3);
        let p = ModelParams::init(&c, 5);
        let tensors: Vec<Tensor> = p.tensors().into_iter().cloned().collect();
        assert_eq!(ModelParams::from_tensors(&c, tensors).unwrap(), p);
        assert_eq!(
            p.trainable().iter().map(|t| t.len()).sum::<usize>(),
            c.trainable_count()
        );
    }

    #[test]
    fn init_statistics() {
        let c = ModelConfig::default();
        let p = ModelParams::init(&c, 1);
        let w = p.dense1.w.data();
        let bound = 2.0 * (2.0 / 960.0f64).sqrt() / TRUNC_NORMAL_STD;
        assert!(w.iter().all(|v| v.abs() <= bound));
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!(
            (var / (2.0 / 960.0) - 1.0).abs() < 0.05,
            "variance ratio {}",
            var / (2.0 / 960.0)
        );
    }
}
