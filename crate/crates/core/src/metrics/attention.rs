use crate::error::{Error, Result};
use crate::model::{ForwardTrace, ModelWeights};
use crate::numerics::{DenseMatrix, Real};

/// `[layer][head]` mean attention paid to position `k`, over samples and
/// over the queries that can see it (`i ≥ k`). Sequences shorter than
/// `k + 1` are skipped.
pub fn avg_attn_to_position<T: Real>(traces: &[ForwardTrace<T>], k: usize) -> Result<DenseMatrix> {
    let first = traces.first().ok_or_else(|| Error::Input("no traces".into()))?;
    let layers = first.attn.len();
    let heads = first.attn.first().map_or(0, Vec::len);
    let mut sum = DenseMatrix::zeros(layers, heads);
    let mut count = 0usize;
    for t in traces {
        if t.attn.len() != layers {
            // surfaces the capture error for non-full traces
            t.attention(0, 0)?;
            return Err(Error::Dimension("traces disagree on layer count".into()));
        }
        let len = t.len();
        if len <= k {
            continue;
        }
        for l in 0..layers {
            for h in 0..heads {
                let p = t.attention(l, h)?;
                let s: f64 = (k..len).map(|i| p.get(i, k).as_f64()).sum();
                sum.set(l, h, sum.get(l, h) + s);
            }
        }
        count += len - k;
    }
    if layers == 0 || count == 0 {
        return Err(Error::EmptyEvaluation);
    }
    sum.scale(1.0 / count as f64);
    Ok(sum)
}

/// Fraction of (layer, head) pairs whose mean attention to `position`
/// exceeds `epsilon`.
pub fn sink_rate<T: Real>(traces: &[ForwardTrace<T>], epsilon: f64, position: usize) -> Result<f64> {
    let m = avg_attn_to_position(traces, position)?;
    let hits = m.as_slice().iter().filter(|&&a| a > epsilon).count();
    Ok(hits as f64 / m.as_slice().len() as f64)
}

fn layer_means(m: &DenseMatrix) -> Vec<f64> {
    (0..m.rows())
        .map(|l| m.row(l).iter().sum::<f64>() / m.cols() as f64)
        .collect()
}

/// First layer whose head-averaged attention to position 0 exceeds
/// `epsilon_emerge`.
pub fn emergence_layer<T: Real>(traces: &[ForwardTrace<T>], epsilon_emerge: f64) -> Result<Option<usize>> {
    let m = avg_attn_to_position(traces, 0)?;
    Ok(layer_means(&m).iter().position(|&a| a > epsilon_emerge))
}

/// Position in `0..k_max` receiving the most attention, averaged over
/// layers `≥ layer_min` and their heads, if that mass exceeds `epsilon`.
/// Ties go to the lower position.
pub fn sink_center<T: Real>(
    traces: &[ForwardTrace<T>],
    layer_min: usize,
    k_max: usize,
    epsilon: f64,
) -> Result<Option<usize>> {
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut best: Option<(usize, f64)> = None;
    for k in 0..k_max.min(len) {
        let m = avg_attn_to_position(traces, k)?;
        let means = layer_means(&m);
        if layer_min >= means.len() {
            return Ok(None);
        }
        let score = means[layer_min..].iter().sum::<f64>() / (means.len() - layer_min) as f64;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((k, score));
        }
    }
    Ok(best.filter(|&(_, s)| s > epsilon).map(|(k, _)| k))
}

/// Copy of `weights` with head `head` of `layer` silenced: its rows of `Wo`
/// are zeroed, so it contributes nothing to the residual stream.
pub fn ablate_head<T: Real>(weights: &ModelWeights<T>, layer: usize, head: usize) -> Result<ModelWeights<T>> {
    let c = &weights.config;
    if head >= c.n_heads {
        return Err(Error::Index(format!("head {head} of {}", c.n_heads)));
    }
    let hd = c.head_dim();
    let mut w = weights.clone();
    let lw = w.layer_mut(layer)?;
    for r in head * hd..(head + 1) * hd {
        lw.wo.row_mut(r).iter_mut().for_each(|x| *x = T::zero());
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn uniform(len: usize) -> Matrix<f64> {
        Matrix::from_fn(len, len, |i, j| if j <= i { 1.0 / (i + 1) as f64 } else { 0.0 })
    }

    fn onto(len: usize, k: usize) -> Matrix<f64> {
        Matrix::from_fn(len, len, |i, j| {
            if i < k {
                if j == i {
                    1.0
                } else {
                    0.0
                }
            } else if j == k {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn uniform_attention_is_not_a_sink() {
        let t = ForwardTrace::from_attention(vec![vec![uniform(64); 2]; 3]).unwrap();
        let m = avg_attn_to_position(std::slice::from_ref(&t), 0).unwrap();
        let h: f64 = (1..=64).map(|i| 1.0 / i as f64).sum::<f64>() / 64.0;
        assert!((m.get(0, 0) - h).abs() < 1e-12);
        assert!((h - 0.0741).abs() < 1e-4);
        assert_eq!(sink_rate(std::slice::from_ref(&t), 0.3, 0).unwrap(), 0.0);
        assert_eq!(emergence_layer(std::slice::from_ref(&t), 0.3).unwrap(), None);
        assert_eq!(sink_center(&[t], 2, 8, 0.3).unwrap(), None);
    }

    #[test]
    fn half_the_heads_sinking() {
        let t = ForwardTrace::from_attention(vec![vec![onto(16, 0), uniform(16)]; 2]).unwrap();
        assert_eq!(sink_rate(&[t], 0.3, 0).unwrap(), 0.5);
    }

    #[test]
    fn position_one_center() {
        let attn = vec![vec![uniform(16); 2], vec![uniform(16); 2], vec![onto(16, 1); 2]];
        let t = ForwardTrace::from_attention(attn).unwrap();
        assert_eq!(sink_center(std::slice::from_ref(&t), 2, 8, 0.3).unwrap(), Some(1));
        assert_eq!(emergence_layer(&[t], 0.3).unwrap(), None);
        let all = ForwardTrace::from_attention(vec![vec![onto(16, 0); 2]; 3]).unwrap();
        assert_eq!(emergence_layer(std::slice::from_ref(&all), 0.3).unwrap(), Some(0));
        assert_eq!(sink_rate(&[all], 0.99, 0).unwrap(), 1.0);
    }
}
