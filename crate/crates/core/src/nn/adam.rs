use super::{Gradients, ModelParams, NnError, Tensor, TrainConfig};

/// First and second moments in trainable-parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self::for_shapes(params.trainable().iter().map(|t| t.shape()))
    }

    pub fn for_shapes<'a>(shapes: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let m: Vec<Tensor> = shapes.into_iter().map(Tensor::zeros).collect();
        Self { v: m.clone(), m, t: 0 }
    }

    /// One bias-corrected Adam update over an arbitrary tensor list.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor], tc: &TrainConfig) -> Result<(), NnError> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(NnError::ShapeError(format!(
                "adam: {} params, {} grads, {} moment tensors",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(NnError::ShapeError(format!(
                    "adam: tensor {i} has param {:?}, grad {:?}, moment {:?}",
                    p.shape(),
                    g.shape(),
                    self.m[i].shape()
                )));
            }
        }
        self.t += 1;
        let (b1, b2) = (tc.adam_beta1, tc.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((theta, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *theta -= tc.learning_rate * m_hat / (v_hat.sqrt() + tc.adam_eps);
            }
        }
        Ok(())
    }
}

pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamState,
    tc: &TrainConfig,
) -> Result<(), NnError> {
    state.step(params.trainable_mut(), &grads.tensors, tc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(&[1], vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let tc = TrainConfig::default();
        let mut a = scalar(0.25);
        let mut s = AdamState::for_shapes([a.shape()]);
        s.step(vec![&mut a], &[scalar(0.0)], &tc).unwrap();
        assert_eq!(a.data(), &[0.25]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let tc = TrainConfig::default();
        let mut a = scalar(0.0);
        let mut s = AdamState::for_shapes([a.shape()]);
        s.step(vec![&mut a], &[scalar(0.3)], &tc).unwrap();
        // m̂ = g, v̂ = g², step = lr·g/(|g| + ε)
        let want = -1e-3 * 0.3 / (0.3 + 1e-7);
        assert!((a.data()[0] - want).abs() < 1e-18);
        assert!((a.data()[0] + 1e-3).abs() < 1e-9);
    }

    #[test]
    fn first_step_is_scale_invariant() {
        let tc = TrainConfig::default();
        let (mut a, mut b) = (scalar(0.0), scalar(0.0));
        let mut s = AdamState::for_shapes([a.shape(), b.shape()]);
        s.step(vec![&mut a, &mut b], &[scalar(0.02), scalar(2.0)], &tc).unwrap();
        assert!((a.data()[0] / b.data()[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn shape_mismatch() {
        let tc = TrainConfig::default();
        let mut a = scalar(0.0);
        let mut s = AdamState::for_shapes([a.shape()]);
        let g = Tensor::zeros(&[2]);
        assert!(s.step(vec![&mut a], &[g], &tc).is_err());
        assert_eq!(s.t, 0);
    }
}
