use serde::{Deserialize, Serialize};

use super::{dot, l2_norm, DenseMatrix, RngState};
use crate::error::{Error, Result};

pub const PCA_MAX_ITERS: usize = 200;
pub const PCA_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    /// `k` rows of unit components; rows past `rank` are all zero.
    pub components: DenseMatrix,
    /// Centered data times components, `N×k`.
    pub projections: DenseMatrix,
    /// Variance captured by each component.
    pub eigenvalues: Vec<f64>,
    pub mean: Vec<f64>,
    /// Number of components with nonzero variance. Less than `k` signals a
    /// rank-deficient input.
    pub rank: usize,
}

impl Pca {
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        if total == 0.0 {
            return vec![0.0; self.eigenvalues.len()];
        }
        self.eigenvalues.iter().map(|e| e / total).collect()
    }
}

/// Top-`k` principal components by power iteration with deflation on the
/// sample covariance of mean-centered data.
pub fn pca_top_k(data: &DenseMatrix, k: usize) -> Result<Pca> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, have: n });
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::Input(format!("k={k} outside 1..={}", n.min(d))));
    }

    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(data.row(i)) {
            *m += v / n as f64;
        }
    }
    let centered = DenseMatrix::from_fn(n, d, |i, j| data.get(i, j) - mean[j]);

    let mut cov = DenseMatrix::zeros(d, d);
    for i in 0..n {
        let r = centered.row(i);
        cov.add_outer(r, r);
    }
    cov.scale(1.0 / (n - 1) as f64);
    let trace: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    let floor = 1e-12 * trace.max(f64::MIN_POSITIVE);

    let mut rng = RngState::new(0x9ca);
    let mut components = DenseMatrix::zeros(k, d);
    let mut eigenvalues = vec![0.0; k];
    let mut rank = 0;
    for c in 0..k {
        let mut v = rng.normal_vec(d);
        orthogonalize(&mut v, &components, c);
        let Some(mut v) = unit(v) else { break };
        let mut lambda = 0.0;
        for _ in 0..PCA_MAX_ITERS {
            let mut w = cov.mul_vec(&v);
            orthogonalize(&mut w, &components, c);
            let next = dot(&w, &v);
            let Some(w) = unit(w) else {
                lambda = 0.0;
                break;
            };
            v = w;
            let converged = (next - lambda).abs() <= PCA_REL_TOL * next.abs().max(floor);
            lambda = next;
            if converged {
                break;
            }
        }
        if lambda <= floor {
            break;
        }
        components.row_mut(c).copy_from_slice(&v);
        eigenvalues[c] = lambda;
        rank += 1;
    }

    let projections = centered.matmul(&components.transpose())?;
    Ok(Pca {
        components,
        projections,
        eigenvalues,
        mean,
        rank,
    })
}

fn orthogonalize(v: &mut [f64], basis: &DenseMatrix, upto: usize) {
    for _ in 0..2 {
        for b in 0..upto {
            let row = basis.row(b);
            let c = dot(v, row);
            v.iter_mut().zip(row).for_each(|(x, r)| *x -= c * r);
        }
    }
}

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = l2_norm(&v);
    (n > 1e-300).then(|| v.into_iter().map(|x| x / n).collect())
}
