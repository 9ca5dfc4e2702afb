use super::{mismatch, Tensor, TensorError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for a list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let (m, v) = shapes
            .into_iter()
            .map(|s| (Tensor::zeros(s), Tensor::zeros(s)))
            .unzip();
        Self {
            config: AdamConfig::default(),
            m,
            v,
            step: 0,
        }
    }

    /// One bias-corrected Adam update. A missing gradient counts as zero.
    pub fn step(
        &mut self,
        params: &mut [Tensor<T>],
        grads: &[Option<Tensor<T>>],
        lr: f64,
    ) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(mismatch(
                "adam_step",
                format!("{} params, {} grads, {} moments", params.len(), grads.len(), self.m.len()),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != self.m[i].shape() || g.as_ref().is_some_and(|g| g.shape() != p.shape()) {
                return Err(mismatch("adam_step", format!("parameter {i}")));
            }
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(beta1), T::lit(beta2));
        let c1 = T::one() - T::lit(beta1.powi(t));
        let c2 = T::one() - T::lit(beta2.powi(t));
        let (lr, eps) = (T::lit(lr), T::lit(eps));
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            let g = grads[i].as_ref().map(Tensor::data);
            for (k, x) in p.data_mut().iter_mut().enumerate() {
                let gk = g.map_or(T::zero(), |g| g[k]);
                m[k] = b1 * m[k] + (T::one() - b1) * gk;
                v[k] = b2 * v[k] + (T::one() - b2) * gk * gk;
                let mhat = m[k] / c1;
                let vhat = v[k] / c2;
                *x -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// `target ← τ·target + (1−τ)·source`, elementwise.
pub fn ema_update<T: Scalar>(target: &mut Tensor<T>, source: &Tensor<T>, tau: f64) -> Result<(), TensorError> {
    if target.shape() != source.shape() {
        return Err(mismatch(
            "ema_update",
            format!("{:?} vs {:?}", target.shape(), source.shape()),
        ));
    }
    let tau = T::lit(tau);
    let rest = T::one() - tau;
    for (t, &s) in target.data_mut().iter_mut().zip(source.data()) {
        *t = tau * *t + rest * s;
    }
    Ok(())
}
