//! AdamW with decoupled weight decay and the warmup / plateau / cosine
//! learning-rate schedule.

use serde::{Deserialize, Serialize};

/// Learning-rate schedule over steps `1..=total`: linear warmup from 0,
/// constant plateau, then cosine annealing to 0 at the final step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub lr: f64,
    pub warmup: usize,
    /// Step at which cosine decay begins.
    pub decay_start: usize,
    pub total: usize,
}

impl Schedule {
    pub fn lr_at(&self, step: usize) -> f64 {
        let step = step.min(self.total);
        if self.warmup > 0 && step < self.warmup {
            return self.lr * step as f64 / self.warmup as f64;
        }
        let start = self.decay_start.max(self.warmup);
        if step <= start || self.total <= start {
            return self.lr;
        }
        let frac = (step - start) as f64 / (self.total - start) as f64;
        0.5 * self.lr * (1.0 + (std::f64::consts::PI * frac).cos())
    }
}

/// AdamW optimizer state.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(n: usize, beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        Self { beta1, beta2, eps: 1e-8, weight_decay, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= lr * self.weight_decay * params[i];
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}
