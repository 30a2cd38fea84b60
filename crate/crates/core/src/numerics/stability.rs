use serde::{Deserialize, Serialize};

use super::{l2_norm, rms_norm, RngState};
use crate::error::{Error, Result};

/// One gain level of a norm-stability sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub gain: f64,
    /// Mean of `‖Norm(g·x + dx) − Norm(g·x)‖` over trials.
    pub mean_delta: f64,
    /// `mean_delta` relative to the first gain in the sweep.
    pub ratio_to_first: f64,
}

/// Scales random `x` by each gain and applies one fixed-size perturbation
/// `dx` with `‖dx‖ = rel_perturb·‖x‖` (relative to the unscaled `x`). The
/// normalized output moves less as the stream grows.
pub fn norm_stability_sweep(
    dim: usize,
    gains: &[f64],
    rel_perturb: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<StabilityRow>> {
    if dim == 0 || gains.is_empty() || trials == 0 {
        return Err(Error::Input("need dim, gains and trials > 0".into()));
    }
    if gains.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::Input("gains must be positive".into()));
    }
    let mut rng = RngState::new(seed);
    let mut sums = vec![0.0; gains.len()];
    for _ in 0..trials {
        let x = rng.normal_vec(dim);
        let dir = rng.normal_vec(dim);
        let s = rel_perturb * l2_norm(&x) / l2_norm(&dir);
        let dx: Vec<f64> = dir.iter().map(|v| v * s).collect();
        for (acc, &g) in sums.iter_mut().zip(gains) {
            let gx: Vec<f64> = x.iter().map(|v| g * v).collect();
            let moved: Vec<f64> = gx.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let a = rms_norm(&gx, None, 0.0)?;
            let b = rms_norm(&moved, None, 0.0)?;
            let diff: Vec<f64> = a.iter().zip(&b).map(|(p, q)| q - p).collect();
            *acc += l2_norm(&diff);
        }
    }
    let first = sums[0] / trials as f64;
    Ok(gains
        .iter()
        .zip(&sums)
        .map(|(&gain, &s)| {
            let mean_delta = s / trials as f64;
            StabilityRow {
                gain,
                mean_delta,
                ratio_to_first: if first > 0.0 { mean_delta / first } else { 0.0 },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn larger_streams_move_less() {
        let rows = norm_stability_sweep(64, &[1.0, 10.0, 100.0], 0.1, 50, 3).unwrap();
        assert!(rows[0].mean_delta > rows[1].mean_delta);
        assert!(rows[1].mean_delta > rows[2].mean_delta);
        assert!(rows[2].ratio_to_first <= 0.02);
        assert_eq!(rows[0].ratio_to_first, 1.0);
    }
}
