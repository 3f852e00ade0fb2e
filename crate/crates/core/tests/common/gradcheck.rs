//! Central finite-difference oracle for the layer kernels and the network.

use ecglite::labels::ClassWeights;
use ecglite::nn::layers::{
    batchnorm_backward, batchnorm_train, conv1d_backward, conv1d_forward, dense_backward, dense_forward,
    leaky_relu_backward, leaky_relu_tensor, maxpool1d_backward, maxpool1d_forward, sigmoid, weighted_bce,
    weighted_bce_logit_grad, BatchNormParams,
};
use ecglite::nn::{Mode, ModelConfig, ModelParams, Network, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-5;

/// Guards the relative error against 0/0 only.
pub const REL_FLOOR: f64 = 1e-300;

/// Batch norm in train mode subtracts the per-channel batch mean, so the
/// loss is exactly invariant to the conv bias feeding it: those gradients
/// are identically zero and are checked in absolute terms instead, against
/// the rounding noise of a central difference at this step.
pub const STRUCTURAL_ZERO_ANALYTIC: f64 = 1e-12;
pub const STRUCTURAL_ZERO_NUMERIC: f64 = 1e-9;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Default, Clone)]
pub struct Report {
    pub checked: usize,
    pub structural_zeros: usize,
    pub structural_violations: usize,
    pub skipped_kinks: usize,
    pub max_rel: f64,
    pub worst: String,
}

impl Report {
    fn record(&mut self, what: &str, i: usize, analytic: f64, numeric: f64) {
        self.checked += 1;
        let e = rel_error(analytic, numeric);
        if e > self.max_rel || self.worst.is_empty() {
            self.max_rel = e;
            self.worst = format!("{what}[{i}] analytic {analytic:e} numeric {numeric:e}");
        }
    }

    pub fn merge(&mut self, o: &Report) {
        self.checked += o.checked;
        self.structural_zeros += o.structural_zeros;
        self.structural_violations += o.structural_violations;
        self.skipped_kinks += o.skipped_kinks;
        if o.max_rel > self.max_rel {
            self.max_rel = o.max_rel;
            self.worst = o.worst.clone();
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0
            && self.max_rel < TOLERANCE
            && self.structural_violations == 0
            && self.skipped_kinks * 100 <= self.checked
    }
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Central difference of `f` along coordinate `i` of `t`.
fn central(t: &Tensor, i: usize, f: &mut dyn FnMut(&Tensor) -> f64) -> f64 {
    let mut plus = t.clone();
    plus.data_mut()[i] += STEP;
    let mut minus = t.clone();
    minus.data_mut()[i] -= STEP;
    (f(&plus) - f(&minus)) / (2.0 * STEP)
}

fn check_all(report: &mut Report, what: &str, t: &Tensor, analytic: &Tensor, f: &mut dyn FnMut(&Tensor) -> f64) {
    for i in 0..t.len() {
        let n = central(t, i, f);
        report.record(what, i, analytic.data()[i], n);
    }
}

/// Projects each layer output onto a random direction `r` so the scalar
/// objective `Σ r·y` has upstream gradient `r`.
pub fn layers(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = Report::default();
    let (batch, ch, len) = (2, 2, 64);

    // conv
    let x = random_tensor(&[batch, ch, len], &mut rng);
    let w = random_tensor(&[5, ch, 3], &mut rng);
    let b = random_tensor(&[3], &mut rng);
    let r = random_tensor(&[batch, 3, len], &mut rng);
    let g = conv1d_backward(&x, &w, &r).unwrap();
    check_all(&mut rep, "conv.x", &x, &g.dx, &mut |x| {
        dot(&conv1d_forward(x, &w, &b).unwrap(), &r)
    });
    check_all(&mut rep, "conv.w", &w, &g.dw, &mut |w| {
        dot(&conv1d_forward(&x, w, &b).unwrap(), &r)
    });
    check_all(&mut rep, "conv.b", &b, &g.db, &mut |b| {
        dot(&conv1d_forward(&x, &w, b).unwrap(), &r)
    });

    // batch norm, train mode
    let x = random_tensor(&[batch, ch, len], &mut rng);
    let mut bn = BatchNormParams::new(ch);
    bn.gamma = random_tensor(&[ch], &mut rng);
    bn.beta = random_tensor(&[ch], &mut rng);
    let r = random_tensor(&[batch, ch, len], &mut rng);
    let eps = 1e-3;
    let fwd = |x: &Tensor, bn: &BatchNormParams| {
        let mut bn = bn.clone();
        dot(&batchnorm_train(x, &mut bn, 0.99, eps).unwrap().0, &r)
    };
    let (_, cache) = batchnorm_train(&x, &mut bn.clone(), 0.99, eps).unwrap();
    let g = batchnorm_backward(&r, &cache, &bn.gamma).unwrap();
    check_all(&mut rep, "bn.x", &x, &g.dx, &mut |x| fwd(x, &bn));
    check_all(&mut rep, "bn.gamma", &bn.gamma, &g.dgamma, &mut |gm| {
        fwd(
            &x,
            &BatchNormParams {
                gamma: gm.clone(),
                ..bn.clone()
            },
        )
    });
    check_all(&mut rep, "bn.beta", &bn.beta, &g.dbeta, &mut |bt| {
        fwd(
            &x,
            &BatchNormParams {
                beta: bt.clone(),
                ..bn.clone()
            },
        )
    });

    // leaky relu
    let x = random_tensor(&[batch, ch, len], &mut rng);
    let r = random_tensor(&[batch, ch, len], &mut rng);
    let g = leaky_relu_backward(&x, &r, 0.3);
    for i in 0..x.len() {
        if x.data()[i].abs() <= STEP {
            rep.skipped_kinks += 1;
            continue;
        }
        let n = central(&x, i, &mut |x| dot(&leaky_relu_tensor(x, 0.3), &r));
        rep.record("leaky.x", i, g.data()[i], n);
    }

    // max pool
    let x = random_tensor(&[batch, ch, len + 1], &mut rng);
    let (y, argmax) = maxpool1d_forward(&x).unwrap();
    let r = random_tensor(y.shape(), &mut rng);
    let g = maxpool1d_backward(&r, &argmax, x.shape()).unwrap();
    for i in 0..x.len() {
        let (mut p, mut m) = (x.clone(), x.clone());
        p.data_mut()[i] += STEP;
        m.data_mut()[i] -= STEP;
        if maxpool1d_forward(&p).unwrap().1 != argmax || maxpool1d_forward(&m).unwrap().1 != argmax {
            rep.skipped_kinks += 1;
            continue;
        }
        let n = central(&x, i, &mut |x| dot(&maxpool1d_forward(x).unwrap().0, &r));
        rep.record("maxpool.x", i, g.data()[i], n);
    }

    // dense
    let x = random_tensor(&[batch, 7], &mut rng);
    let w = random_tensor(&[7, 4], &mut rng);
    let b = random_tensor(&[4], &mut rng);
    let r = random_tensor(&[batch, 4], &mut rng);
    let g = dense_backward(&x, &w, &r).unwrap();
    check_all(&mut rep, "dense.x", &x, &g.dx, &mut |x| {
        dot(&dense_forward(x, &w, &b).unwrap(), &r)
    });
    check_all(&mut rep, "dense.w", &w, &g.dw, &mut |w| {
        dot(&dense_forward(&x, w, &b).unwrap(), &r)
    });
    check_all(&mut rep, "dense.b", &b, &g.db, &mut |b| {
        dot(&dense_forward(&x, &w, b).unwrap(), &r)
    });

    // sigmoid + weighted BCE at the logit
    let z = random_tensor(&[batch], &mut rng).map(|v| 3.0 * v);
    let y = vec![1.0, 0.0];
    let (wn, wa) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
    let probs: Vec<f64> = z.data().iter().map(|&v| sigmoid(v)).collect();
    let analytic = Tensor::from_vec(&[batch], weighted_bce_logit_grad(&probs, &y, wn, wa)).unwrap();
    check_all(&mut rep, "bce.logit", &z, &analytic, &mut |z| {
        let p: Vec<f64> = z.data().iter().map(|&v| sigmoid(v)).collect();
        weighted_bce(&p, &y, wn, wa)
    });
    rep
}

/// Small six-block network used by the end-to-end check.
pub fn small_config() -> ModelConfig {
    ModelConfig {
        in_channels: 2,
        input_length: 64,
        conv_filters: vec![3, 3, 4, 4, 4, 4],
        conv_kernels: vec![5, 5, 3, 3, 3, 3],
        dense_hidden: 5,
        ..ModelConfig::default()
    }
}

/// Every trainable parameter of a randomly initialised network against
/// central differences of the weighted loss, batch norm in train mode.
pub fn end_to_end(seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = small_config();
    let mut params = ModelParams::init(&config, seed);
    // Non-trivial BN affine and biases so every gradient path is exercised.
    for b in &mut params.blocks {
        b.conv_b = random_tensor(b.conv_b.shape(), &mut rng);
        b.bn.gamma = random_tensor(b.bn.gamma.shape(), &mut rng).map(|v| 1.0 + 0.5 * v);
        b.bn.beta = random_tensor(b.bn.beta.shape(), &mut rng).map(|v| 0.5 * v);
    }
    params.dense1.b = random_tensor(params.dense1.b.shape(), &mut rng);
    params.dense2.b = random_tensor(params.dense2.b.shape(), &mut rng);
    let x = random_tensor(&[2, 2, 64], &mut rng);
    let labels = [1.0, 0.0];
    let weights = ClassWeights {
        weight_normal: rng.random_range(0.5..2.0),
        weight_abnormal: rng.random_range(0.5..2.0),
    };

    let mut net = Network::new(config.clone(), params.clone(), 0.99).unwrap();
    net.forward(&x, Mode::Train).unwrap();
    let pattern = net.activation_pattern().unwrap();
    let (_, grads) = net.backward(&labels, weights).unwrap();

    let eval = |p: &ModelParams| {
        let mut n = Network::new(config.clone(), p.clone(), 0.99).unwrap();
        n.forward(&x, Mode::Train).unwrap();
        let same = n.activation_pattern().unwrap() == pattern;
        (n.backward(&labels, weights).unwrap().0, same)
    };

    let mut rep = Report::default();
    let n_tensors = params.trainable().len();
    for ti in 0..n_tensors {
        let len = params.trainable()[ti].len();
        for i in 0..len {
            let mut plus = params.clone();
            plus.trainable_mut()[ti].data_mut()[i] += STEP;
            let mut minus = params.clone();
            minus.trainable_mut()[ti].data_mut()[i] -= STEP;
            let (lp, sp) = eval(&plus);
            let (lm, sm) = eval(&minus);
            if !(sp && sm) {
                rep.skipped_kinks += 1;
                continue;
            }
            let (analytic, numeric) = (grads.tensors[ti].data()[i], (lp - lm) / (2.0 * STEP));
            let is_conv_bias = ti < 4 * params.blocks.len() && ti % 4 == 1;
            if is_conv_bias {
                rep.structural_zeros += 1;
                if analytic.abs() > STRUCTURAL_ZERO_ANALYTIC || numeric.abs() > STRUCTURAL_ZERO_NUMERIC {
                    rep.structural_violations += 1;
                }
                continue;
            }
            rep.record(&format!("param{ti}"), i, analytic, numeric);
        }
    }
    rep
}
