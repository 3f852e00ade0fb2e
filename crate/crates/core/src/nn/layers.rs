//! Layer kernels. Activations are laid out `[batch × channels × length]`,
//! conv weights `[kernel × in_ch × out_ch]`, dense weights `[in × out]`.

use super::{NnError, Scalar, Tensor};

fn shape_err<T>(msg: String) -> Result<T, NnError> {
    Err(NnError::ShapeError(msg))
}

fn dims3<T: Scalar>(x: &Tensor<T>, what: &str) -> Result<(usize, usize, usize), NnError> {
    x.expect_rank(3, what)?;
    Ok((x.shape()[0], x.shape()[1], x.shape()[2]))
}

/// Valid output range `t` for tap offset `off` so that `t + off ∈ [0, len)`.
#[inline]
fn tap_range(len: usize, off: isize) -> (usize, usize) {
    let t0 = (-off).max(0) as usize;
    let t1 = (len as isize - off).clamp(0, len as isize) as usize;
    (t0.min(t1), t1)
}

fn check_conv<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(usize, usize, usize, usize, usize), NnError> {
    let (batch, cin, len) = dims3(x, "conv1d input")?;
    w.expect_rank(3, "conv1d weights")?;
    let (k, wcin, cout) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    if wcin != cin {
        return shape_err(format!("conv1d: input has {cin} channels, weights expect {wcin}"));
    }
    if k % 2 == 0 {
        return shape_err(format!("conv1d: kernel size {k} must be odd"));
    }
    if b.shape() != [cout] {
        return shape_err(format!("conv1d: bias shape {:?}, expected [{cout}]", b.shape()));
    }
    Ok((batch, cin, len, k, cout))
}

/// Stride-1 cross-correlation with `(k − 1) / 2` zeros on each side.
pub fn conv1d_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (batch, cin, len, k, cout) = check_conv(x, w, b)?;
    let pad = (k / 2) as isize;
    let (xd, wd) = (x.data(), w.data());
    let mut y = Tensor::zeros(&[batch, cout, len]);
    let yd = y.data_mut();
    for bi in 0..batch {
        for o in 0..cout {
            let yrow = &mut yd[(bi * cout + o) * len..][..len];
            yrow.fill(b.data()[o]);
            for c in 0..cin {
                let xrow = &xd[(bi * cin + c) * len..][..len];
                for tap in 0..k {
                    let wv = wd[(tap * cin + c) * cout + o];
                    let off = tap as isize - pad;
                    let (t0, t1) = tap_range(len, off);
                    let src = &xrow[(t0 as isize + off) as usize..(t1 as isize + off) as usize];
                    for (yv, &xv) in yrow[t0..t1].iter_mut().zip(src) {
                        *yv = *yv + wv * xv;
                    }
                }
            }
        }
    }
    Ok(y)
}

pub struct ConvGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

pub fn conv1d_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<ConvGrads, NnError> {
    let cout = w.shape().get(2).copied().unwrap_or(0);
    let (batch, cin, len, k, _) = check_conv(x, w, &Tensor::zeros(&[cout]))?;
    if dy.shape() != [batch, cout, len] {
        return shape_err(format!("conv1d backward: upstream shape {:?}", dy.shape()));
    }
    let pad = (k / 2) as isize;
    let (xd, wd, dyd) = (x.data(), w.data(), dy.data());
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[cout]);
    for bi in 0..batch {
        for o in 0..cout {
            let dyrow = &dyd[(bi * cout + o) * len..][..len];
            db.data_mut()[o] += dyrow.iter().sum::<f64>();
            for c in 0..cin {
                let xrow = &xd[(bi * cin + c) * len..][..len];
                let dxrow = &mut dx.data_mut()[(bi * cin + c) * len..][..len];
                for tap in 0..k {
                    let widx = (tap * cin + c) * cout + o;
                    let wv = wd[widx];
                    let off = tap as isize - pad;
                    let (t0, t1) = tap_range(len, off);
                    let (s0, s1) = ((t0 as isize + off) as usize, (t1 as isize + off) as usize);
                    let mut acc = 0.0;
                    for ((&g, &xv), dxv) in dyrow[t0..t1].iter().zip(&xrow[s0..s1]).zip(&mut dxrow[s0..s1]) {
                        acc += g * xv;
                        *dxv += wv * g;
                    }
                    dw.data_mut()[widx] += acc;
                }
            }
        }
    }
    Ok(ConvGrads { dx, dw, db })
}

/// Per-channel affine and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T = f64> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub moving_mean: Tensor<T>,
    pub moving_var: Tensor<T>,
}

impl<T: Scalar> BatchNormParams<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            moving_mean: Tensor::zeros(&[channels]),
            moving_var: Tensor::filled(&[channels], T::one()),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, channels: usize) -> Result<(), NnError> {
        let ok = [&self.gamma, &self.beta, &self.moving_mean, &self.moving_var]
            .iter()
            .all(|t| t.shape() == [channels]);
        if ok {
            Ok(())
        } else {
            shape_err(format!("batchnorm: parameters do not match {channels} channels"))
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
}

/// Train mode: normalize with batch statistics (biased variance over batch
/// and length), then fold them into the moving statistics.
pub fn batchnorm_train(
    x: &Tensor,
    bn: &mut BatchNormParams,
    momentum: f64,
    eps: f64,
) -> Result<(Tensor, BatchNormCache), NnError> {
    let (batch, ch, len) = dims3(x, "batchnorm input")?;
    if batch < 2 {
        return Err(NnError::BatchTooSmall(batch));
    }
    bn.check(ch)?;
    let count = (batch * len) as f64;
    let xd = x.data();
    let mut y = Tensor::zeros(x.shape());
    let mut xhat = Tensor::zeros(x.shape());
    let mut inv_std = vec![0.0; ch];
    for c in 0..ch {
        let rows = || (0..batch).map(move |b| (b * ch + c) * len);
        let mean = rows().map(|r| xd[r..r + len].iter().sum::<f64>()).sum::<f64>() / count;
        let var = rows()
            .map(|r| xd[r..r + len].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
            .sum::<f64>()
            / count;
        let is = 1.0 / (var + eps).sqrt();
        inv_std[c] = is;
        let (g, be) = (bn.gamma.data()[c], bn.beta.data()[c]);
        for r in rows() {
            for i in r..r + len {
                let h = (xd[i] - mean) * is;
                xhat.data_mut()[i] = h;
                y.data_mut()[i] = g * h + be;
            }
        }
        let mm = &mut bn.moving_mean.data_mut()[c];
        *mm = momentum * *mm + (1.0 - momentum) * mean;
        let mv = &mut bn.moving_var.data_mut()[c];
        *mv = momentum * *mv + (1.0 - momentum) * var;
    }
    Ok((y, BatchNormCache { xhat, inv_std }))
}

/// Eval mode: normalize with the moving statistics only.
pub fn batchnorm_eval<T: Scalar>(x: &Tensor<T>, bn: &BatchNormParams<T>, eps: f64) -> Result<Tensor<T>, NnError> {
    let (batch, ch, len) = dims3(x, "batchnorm input")?;
    bn.check(ch)?;
    let eps = T::from_f64(eps);
    let scale: Vec<T> = (0..ch)
        .map(|c| bn.gamma.data()[c] / (bn.moving_var.data()[c] + eps).sqrt())
        .collect();
    let shift: Vec<T> = (0..ch)
        .map(|c| bn.beta.data()[c] - bn.moving_mean.data()[c] * scale[c])
        .collect();
    let mut y = x.clone();
    for b in 0..batch {
        for c in 0..ch {
            let row = &mut y.data_mut()[(b * ch + c) * len..][..len];
            for v in row {
                *v = *v * scale[c] + shift[c];
            }
        }
    }
    Ok(y)
}

pub struct BatchNormGrads {
    pub dx: Tensor,
    pub dgamma: Tensor,
    pub dbeta: Tensor,
}

pub fn batchnorm_backward(dy: &Tensor, cache: &BatchNormCache, gamma: &Tensor) -> Result<BatchNormGrads, NnError> {
    let (batch, ch, len) = dims3(dy, "batchnorm upstream")?;
    if cache.xhat.shape() != dy.shape() || gamma.shape() != [ch] {
        return shape_err("batchnorm backward: cache does not match upstream".into());
    }
    let count = (batch * len) as f64;
    let (dyd, xh) = (dy.data(), cache.xhat.data());
    let mut dx = Tensor::zeros(dy.shape());
    let mut dgamma = Tensor::zeros(&[ch]);
    let mut dbeta = Tensor::zeros(&[ch]);
    for c in 0..ch {
        let rows = || (0..batch).map(move |b| (b * ch + c) * len);
        let (mut sg, mut sb) = (0.0, 0.0);
        for r in rows() {
            for i in r..r + len {
                sg += dyd[i] * xh[i];
                sb += dyd[i];
            }
        }
        dgamma.data_mut()[c] = sg;
        dbeta.data_mut()[c] = sb;
        let k = gamma.data()[c] * cache.inv_std[c] / count;
        for r in rows() {
            for i in r..r + len {
                dx.data_mut()[i] = k * (count * dyd[i] - sb - xh[i] * sg);
            }
        }
    }
    Ok(BatchNormGrads { dx, dgamma, dbeta })
}

#[inline]
pub fn leaky_relu<T: Scalar>(x: T, alpha: T) -> T {
    if x >= T::zero() {
        x
    } else {
        alpha * x
    }
}

pub fn leaky_relu_tensor<T: Scalar>(x: &Tensor<T>, alpha: f64) -> Tensor<T> {
    let a = T::from_f64(alpha);
    x.map(|v| leaky_relu(v, a))
}

/// Gradient through leaky ReLU given the layer's input.
pub fn leaky_relu_backward(input: &Tensor, dy: &Tensor, alpha: f64) -> Tensor {
    let mut dx = dy.clone();
    for (g, &x) in dx.data_mut().iter_mut().zip(input.data()) {
        if x < 0.0 {
            *g *= alpha;
        }
    }
    dx
}

/// Non-overlapping max pooling with window 2; a trailing odd sample is
/// dropped and the first index wins ties. Returns flat argmax indices into `x`.
pub fn maxpool1d_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>), NnError> {
    let (batch, ch, len) = dims3(x, "maxpool input")?;
    if len < 2 {
        return shape_err(format!("maxpool: length {len} is below the pool size 2"));
    }
    let out_len = len / 2;
    let mut y = Tensor::zeros(&[batch, ch, out_len]);
    let mut argmax = Vec::with_capacity(batch * ch * out_len);
    let xd = x.data();
    for row in 0..batch * ch {
        let base = row * len;
        for (t, yv) in y.data_mut()[row * out_len..][..out_len].iter_mut().enumerate() {
            let i = base + 2 * t;
            let pick = if xd[i + 1] > xd[i] { i + 1 } else { i };
            *yv = xd[pick];
            argmax.push(pick);
        }
    }
    Ok((y, argmax))
}

pub fn maxpool1d_backward(dy: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor, NnError> {
    if dy.len() != argmax.len() {
        return shape_err("maxpool backward: argmax does not match upstream".into());
    }
    let mut dx = Tensor::zeros(input_shape);
    for (&g, &i) in dy.data().iter().zip(argmax) {
        dx.data_mut()[i] += g;
    }
    Ok(dx)
}

/// `y = x W + b`
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    x.expect_rank(2, "dense input")?;
    w.expect_rank(2, "dense weights")?;
    let (batch, n) = (x.shape()[0], x.shape()[1]);
    let m = w.shape()[1];
    if w.shape()[0] != n || b.shape() != [m] {
        return shape_err(format!(
            "dense: input width {n}, weights {:?}, bias {:?}",
            w.shape(),
            b.shape()
        ));
    }
    let mut y = Tensor::zeros(&[batch, m]);
    for bi in 0..batch {
        let yrow = &mut y.data_mut()[bi * m..][..m];
        yrow.copy_from_slice(b.data());
        for (i, &xv) in x.data()[bi * n..][..n].iter().enumerate() {
            for (yv, &wv) in yrow.iter_mut().zip(&w.data()[i * m..][..m]) {
                *yv = *yv + xv * wv;
            }
        }
    }
    Ok(y)
}

pub struct DenseGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

pub fn dense_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<DenseGrads, NnError> {
    let (batch, n) = (x.shape()[0], x.shape()[1]);
    let m = w.shape()[1];
    if dy.shape() != [batch, m] || w.shape()[0] != n {
        return shape_err(format!("dense backward: upstream shape {:?}", dy.shape()));
    }
    let mut dx = Tensor::zeros(&[batch, n]);
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[m]);
    for bi in 0..batch {
        let g = &dy.data()[bi * m..][..m];
        for (d, &gv) in db.data_mut().iter_mut().zip(g) {
            *d += gv;
        }
        for i in 0..n {
            let xv = x.data()[bi * n + i];
            let wrow = &w.data()[i * m..][..m];
            dx.data_mut()[bi * n + i] = wrow.iter().zip(g).map(|(a, b)| a * b).sum();
            for (d, &gv) in dw.data_mut()[i * m..][..m].iter_mut().zip(g) {
                *d += xv * gv;
            }
        }
    }
    Ok(DenseGrads { dx, dw, db })
}

/// Logistic function, kept strictly inside (0, 1) for any finite input.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    let one = T::one();
    let p = if z >= T::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    };
    let half_eps = T::epsilon() / T::from_f64(2.0);
    p.max(T::min_positive_value()).min(one - half_eps)
}

/// Probability clamp used inside the loss.
pub const BCE_EPS: f64 = 1e-7;

/// Mean over the batch of `−w_y · [y log p + (1 − y) log(1 − p)]`.
pub fn weighted_bce(p: &[f64], y: &[f64], w_normal: f64, w_abnormal: f64) -> f64 {
    assert_eq!(p.len(), y.len(), "weighted_bce: length mismatch");
    if p.is_empty() {
        return 0.0;
    }
    let total: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            let w = if y >= 0.5 { w_abnormal } else { w_normal };
            -w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / p.len() as f64
}

/// d loss / d logit = (p − y) · w_y / batch.
pub fn weighted_bce_logit_grad(p: &[f64], y: &[f64], w_normal: f64, w_abnormal: f64) -> Vec<f64> {
    let n = p.len() as f64;
    p.iter()
        .zip(y)
        .map(|(&p, &y)| {
            let w = if y >= 0.5 { w_abnormal } else { w_normal };
            (p - y) * w / n
        })
        .collect()
}
