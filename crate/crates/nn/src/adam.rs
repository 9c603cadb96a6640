use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept in the parameter type.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub cfg: AdamConfig,
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub t: u64,
}

impl<F: Real> Adam<F> {
    pub fn new(len: usize, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [F], grads: &[F]) {
        assert_eq!(params.len(), self.m.len(), "adam state does not match parameters");
        assert_eq!(grads.len(), params.len(), "gradient does not match parameters");
        self.t += 1;
        let c = self.cfg;
        let b1 = F::of(c.beta1);
        let b2 = F::of(c.beta2);
        let one = F::one();
        let bc1 = F::of(1.0 - c.beta1.powf(self.t as f64));
        let bc2 = F::of(1.0 - c.beta2.powf(self.t as f64));
        let lr = F::of(c.lr);
        let eps = F::of(c.eps);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}
