use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelWeights, OptimizerState};

pub const WARMUP_STEPS: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seq_len: usize,
    pub snapshot_every: usize,
    pub seed: u64,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.95,
            adam_eps: 1e-8,
            weight_decay: 0.1,
            steps: 1000,
            batch_size: 8,
            seq_len: 64,
            snapshot_every: 100,
            seed: 0,
            grad_clip: 1.0,
        }
    }
}

impl TrainConfig {
    /// `steps = 0` is allowed and yields a single snapshot of the initial
    /// weights.
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("learning_rate", self.learning_rate),
            ("adam_eps", self.adam_eps),
            ("grad_clip", self.grad_clip),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v}, must be positive")));
            }
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} = {b}, must be in [0, 1)")));
            }
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if self.batch_size == 0 || self.seq_len == 0 || self.snapshot_every == 0 {
            return Err(Error::Config(
                "batch_size, seq_len and snapshot_every must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Linear warmup over the first [`WARMUP_STEPS`] updates, then constant.
    pub fn lr_at(&self, step: u64) -> f64 {
        self.learning_rate * ((step + 1) as f64 / WARMUP_STEPS as f64).min(1.0)
    }
}

/// Rescales `grads` in place to global L2 norm at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut ModelWeights<f32>, max_norm: f64) -> f64 {
    let sq: f64 = grads
        .tensors()
        .iter()
        .flat_map(|(_, _, t)| t.iter())
        .map(|&g| (g as f64) * (g as f64))
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        let s = (max_norm / norm) as f32;
        for (_, _, t) in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}

/// Adam with decoupled weight decay. Norm scales are not decayed.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub state: OptimizerState,
}

impl AdamW {
    pub fn new(weights: &ModelWeights<f32>) -> Self {
        Self {
            state: OptimizerState {
                step: 0,
                m: weights.zeros_like(),
                v: weights.zeros_like(),
            },
        }
    }

    pub fn from_state(state: OptimizerState) -> Self {
        Self { state }
    }

    pub fn step(&mut self, weights: &mut ModelWeights<f32>, grads: &ModelWeights<f32>, cfg: &TrainConfig) {
        let lr = cfg.lr_at(self.state.step);
        self.state.step += 1;
        let t = self.state.step as i32;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let grads = grads.tensors();
        let mut ms = self.state.m.tensors_mut();
        let mut vs = self.state.v.tensors_mut();
        for (i, (name, _, w)) in weights.tensors_mut().into_iter().enumerate() {
            let decay = if name.ends_with("norm") {
                0.0
            } else {
                cfg.weight_decay
            };
            let g = grads[i].2;
            let m = &mut *ms[i].2;
            let v = &mut *vs[i].2;
            for j in 0..w.len() {
                let gj = g[j] as f64;
                let mj = b1 * m[j] as f64 + (1.0 - b1) * gj;
                let vj = b2 * v[j] as f64 + (1.0 - b2) * gj * gj;
                m[j] = mj as f32;
                v[j] = vj as f32;
                let update = (mj / c1) / ((vj / c2).sqrt() + cfg.adam_eps);
                let wj = w[j] as f64;
                w[j] = (wj - lr * (update + decay * wj)) as f32;
            }
        }
    }
}
