use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{loss_and_grad, ModelWeights, Sample};
use crate::numerics::RngState;

/// One scalar parameter: entry `entry` of the `tensor`-th tensor in
/// [`ModelWeights::tensors`] order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamIndex {
    pub tensor: usize,
    pub entry: usize,
}

/// `per_tensor` random entries from every tensor.
pub fn sample_param_subset<T: crate::numerics::Real>(
    weights: &ModelWeights<T>,
    per_tensor: usize,
    seed: u64,
) -> Vec<ParamIndex> {
    let mut rng = RngState::new(seed);
    let mut out = Vec::new();
    for (tensor, (_, _, t)) in weights.tensors().iter().enumerate() {
        for _ in 0..per_tensor {
            out.push(ParamIndex {
                tensor,
                entry: rng.below(t.len()),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Tensor name and entry of the worst parameter.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Analytic gradients against central differences with step `h`. Relative
/// error is `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(
    weights: &ModelWeights<f64>,
    batch: &[Sample],
    subset: &[ParamIndex],
    h: f64,
) -> Result<GradCheck> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step {h}")));
    }
    let (_, grads) = loss_and_grad(weights, batch)?;
    let grads = grads.tensors();
    let loss = |w: &ModelWeights<f64>| loss_and_grad(w, batch).map(|(v, _)| v.mean);
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for p in subset {
        let (name, _, g) = grads
            .get(p.tensor)
            .ok_or_else(|| Error::Index(format!("tensor {}", p.tensor)))?;
        let analytic = *g
            .get(p.entry)
            .ok_or_else(|| Error::Index(format!("{name}[{}]", p.entry)))?;
        let mut w = weights.clone();
        let x0 = w.tensors()[p.tensor].2[p.entry];
        w.tensors_mut()[p.tensor].2[p.entry] = x0 + h;
        let up = loss(&w)?;
        w.tensors_mut()[p.tensor].2[p.entry] = x0 - h;
        let down = loss(&w)?;
        let numeric = (up - down) / (2.0 * h);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((name.clone(), p.entry));
        }
    }
    Ok(report)
}
