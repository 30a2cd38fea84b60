use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub mean: f64,
    pub count: usize,
}

/// Log-sum-exp of a row, accumulated in f64.
pub(crate) fn log_sum_exp<T: Real>(row: &[T]) -> f64 {
    let m = row.iter().map(|x| x.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = row.iter().map(|x| (x.as_f64() - m).exp()).sum();
    m + s.ln()
}

/// Mean next-token negative log-likelihood over positions where `mask` is
/// true. `targets[i]` is the token that row `i` of `logits` should predict.
pub fn cross_entropy_loss<T: Real>(logits: &Matrix<T>, targets: &[u32], mask: &[bool]) -> Result<LossValue> {
    if targets.len() != logits.rows() || mask.len() != logits.rows() {
        return Err(Error::Dimension(format!(
            "{} logit rows, {} targets, {} mask entries",
            logits.rows(),
            targets.len(),
            mask.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0;
    for (i, (&t, &m)) in targets.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        let row = logits.row(i);
        let t = t as usize;
        if t >= row.len() {
            return Err(Error::Input(format!("target {t} out of vocab {}", row.len())));
        }
        total += log_sum_exp(row) - row[t].as_f64();
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(LossValue {
        mean: total / count as f64,
        count,
    })
}
