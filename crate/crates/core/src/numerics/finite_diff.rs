use serde::{Deserialize, Serialize};

use super::{random_unit, rms_norm, rms_norm_jvp, RngState};
use crate::error::{Error, Result};

/// Central-difference directional derivative `(f(x + h·dx) − f(x − h·dx)) / 2h`.
pub fn finite_diff_jvp<F>(f: F, x: &[f64], dx: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert!(h > 0.0, "finite difference step must be positive");
    let plus: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a - h * b).collect();
    f(&plus)
        .iter()
        .zip(f(&minus))
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianCheck {
    pub dim: usize,
    pub cases: usize,
    /// Largest component gap between the analytic JVP and central differences.
    pub max_abs_error: f64,
    /// Largest component of the analytic JVP along `dx = c·x`.
    pub parallel_change: f64,
}

/// RMSNorm JVP against central differences on `cases` pairs of Gaussian `x`
/// and uniformly random unit direction `dx`, plus the same count of parallel
/// perturbations.
pub fn rms_jacobian_check(dim: usize, cases: usize, h: f64, seed: u64) -> Result<JacobianCheck> {
    if dim == 0 || cases == 0 || !(h > 0.0) {
        return Err(Error::Input("need dim, cases and h > 0".into()));
    }
    let mut rng = RngState::new(seed);
    let f = |v: &[f64]| rms_norm(v, None, 0.0).expect("nonzero input");
    let mut out = JacobianCheck {
        dim,
        cases,
        max_abs_error: 0.0,
        parallel_change: 0.0,
    };
    for _ in 0..cases {
        let x = rng.normal_vec(dim);
        let dx = random_unit(dim, &mut rng);
        let analytic = rms_norm_jvp(&x, &dx)?;
        let numeric = finite_diff_jvp(f, &x, &dx, h);
        for (a, n) in analytic.iter().zip(&numeric) {
            out.max_abs_error = out.max_abs_error.max((a - n).abs());
        }
        let c = rng.normal();
        let par: Vec<f64> = x.iter().map(|v| c * v).collect();
        for v in rms_norm_jvp(&x, &par)? {
            out.parallel_change = out.parallel_change.max(v.abs());
        }
    }
    Ok(out)
}
