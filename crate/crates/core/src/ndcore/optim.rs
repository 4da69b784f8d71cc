//! Adam with bias correction and a linearly decaying learning rate.

use super::tensor::{Scalar, Tensor};
use super::TensorError;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Linear decay from `base_lr` at step 0 to zero at `total_steps`, no warmup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub total_steps: u64,
}

impl LrSchedule {
    pub fn new(base_lr: f64, total_steps: u64) -> Self {
        Self {
            base_lr,
            total_steps,
        }
    }

    pub fn lr(&self, step: u64) -> f64 {
        if self.total_steps == 0 {
            return self.base_lr;
        }
        let frac = step as f64 / self.total_steps as f64;
        self.base_lr * (1.0 - frac).max(0.0)
    }
}

/// First/second moment accumulators for a fixed list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState<T: Scalar> {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'p>(params: impl IntoIterator<Item = &'p Tensor<T>>) -> Self {
        Self::with_betas(params, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS)
    }

    pub fn with_betas<'p>(
        params: impl IntoIterator<Item = &'p Tensor<T>>,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Self {
        let m: Vec<_> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        let v = m.clone();
        Self {
            step: 0,
            beta1,
            beta2,
            eps,
            m,
            v,
        }
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.m
    }

    /// One bias-corrected Adam update at learning rate `lr`.
    ///
    /// Every gradient is checked for finiteness before any parameter moves.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &[&Tensor<T>],
        lr: f64,
    ) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TensorError::ParamCount {
                expected: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(TensorError::Shape {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(TensorError::NonFinite { index: i });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one = T::one();
        let bc1 = T::from_f64(1.0 - self.beta1.powi(t));
        let bc2 = T::from_f64(1.0 - self.beta2.powi(t));
        let eps = T::from_f64(self.eps);
        let lr = T::from_f64(lr);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let iter = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((theta, &gv), (mv, vv)) in iter {
                *mv = b1 * *mv + (one - b1) * gv;
                *vv = b2 * *vv + (one - b2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
