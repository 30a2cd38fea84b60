use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CaptureLevel, ForwardTrace, LayerStep};
use crate::numerics::{cosine, l2_norm, pca_top_k, rms, DenseMatrix, Pca, Real};

fn require_hidden<T: Real>(traces: &[ForwardTrace<T>]) -> Result<&ForwardTrace<T>> {
    let first = traces.first().ok_or_else(|| Error::Input("no traces".into()))?;
    if traces.iter().any(|t| t.capture == CaptureLevel::Logits) {
        return Err(Error::InsufficientCapture {
            needed: "hidden",
            have: "logits",
        });
    }
    Ok(first)
}

/// `[step][position]` mean ℓ2 norm of the hidden state, averaged over the
/// samples long enough to have that position.
pub fn norm_profile<T: Real>(traces: &[ForwardTrace<T>]) -> Result<DenseMatrix> {
    let first = require_hidden(traces)?;
    let steps = first.hidden.len();
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut sum = DenseMatrix::zeros(steps, len);
    let mut count = vec![0usize; len];
    for t in traces {
        if t.hidden.len() != steps {
            return Err(Error::Dimension("traces disagree on layer count".into()));
        }
        for (s, h) in t.hidden.iter().enumerate() {
            for i in 0..h.rows() {
                sum.set(s, i, sum.get(s, i) + l2_norm(h.row(i)).as_f64());
            }
        }
        count.iter_mut().take(t.len()).for_each(|c| *c += 1);
    }
    for s in 0..steps {
        for (i, &c) in count.iter().enumerate() {
            sum.set(s, i, sum.get(s, i) / c as f64);
        }
    }
    Ok(sum)
}

/// For each position, the mean cosine between a sample's hidden state at
/// `step` and the across-sample mean state at that position.
pub fn cosine_to_position_mean<T: Real>(traces: &[ForwardTrace<T>], step: LayerStep) -> Result<Vec<f64>> {
    require_hidden(traces)?;
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let rows: Vec<Vec<f64>> = traces
            .iter()
            .filter(|t| t.len() > i)
            .map(|t| {
                t.hidden_at(step)
                    .map(|h| h.row(i).iter().map(|v| v.as_f64()).collect())
            })
            .collect::<Result<_>>()?;
        let mut mean = vec![0.0; rows[0].len()];
        for r in &rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
        out.push(rows.iter().map(|r| cosine(r, &mean)).sum::<f64>() / rows.len() as f64);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaSeparation {
    pub pca: Pca,
    /// Row indices of position-0 samples in the PCA data.
    pub p0_rows: Vec<usize>,
    /// Lowest position-0 projection on the first component minus the highest
    /// other projection, with the component oriented toward position 0.
    pub margin: f64,
}

/// PCA of RMS-normalized hidden states at `step` over every position of
/// every trace, and how well the first component separates position 0.
pub fn p0_pca_separation<T: Real>(
    traces: &[ForwardTrace<T>],
    step: LayerStep,
    k: usize,
) -> Result<PcaSeparation> {
    require_hidden(traces)?;
    let mut rows = Vec::new();
    let mut p0_rows = Vec::new();
    for t in traces {
        let h = t.hidden_at(step)?;
        for i in 0..h.rows() {
            if i == 0 {
                p0_rows.push(rows.len());
            }
            let x: Vec<f64> = h.row(i).iter().map(|v| v.as_f64()).collect();
            let r = rms(&x, 0.0);
            rows.push(if r > 0.0 {
                x.iter().map(|v| v / r).collect()
            } else {
                x
            });
        }
    }
    let data = DenseMatrix::from_rows(&rows)?;
    let pca = pca_top_k(&data, k)?;
    let proj: Vec<f64> = (0..rows.len()).map(|i| pca.projections.get(i, 0)).collect();
    let is_p0 = |i: usize| p0_rows.binary_search(&i).is_ok();
    let mean_of = |want: bool| {
        let v: Vec<f64> = (0..proj.len())
            .filter(|&i| is_p0(i) == want)
            .map(|i| proj[i])
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let sign = if mean_of(true) >= mean_of(false) {
        1.0
    } else {
        -1.0
    };
    let lo = (0..proj.len())
        .filter(|&i| is_p0(i))
        .map(|i| sign * proj[i])
        .fold(f64::INFINITY, f64::min);
    let hi = (0..proj.len())
        .filter(|&i| !is_p0(i))
        .map(|i| sign * proj[i])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(PcaSeparation {
        pca,
        p0_rows,
        margin: lo - hi,
    })
}
