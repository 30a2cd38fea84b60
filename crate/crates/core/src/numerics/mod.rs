//! Dense linear algebra, sampling, normalization and oracle helpers.

mod finite_diff;
mod matrix;
mod norm;
mod pca;
mod rng;
mod softmax;
mod sphere;
mod stability;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

pub use finite_diff::{finite_diff_jvp, rms_jacobian_check, JacobianCheck};
pub use matrix::{DenseMatrix, Matrix};
pub use norm::{rms, rms_norm, rms_norm_backward, rms_norm_jvp, DEFAULT_RMS_EPS};
pub use pca::{pca_top_k, Pca, PCA_MAX_ITERS, PCA_REL_TOL};
pub use rng::RngState;
pub use softmax::{softmax_causal, softmax_in_place};
pub(crate) use sphere::unit_orthogonal_into;
pub use sphere::{random_orthogonal, random_unit, sample_unit_orthogonal};
pub use stability::{norm_stability_sweep, StabilityRow};

/// Floating point scalar used by the model. Implemented for `f32` and `f64`.
pub trait Real:
    num_traits::Float
    + Default
    + Debug
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    const DTYPE: &'static str;

    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    const DTYPE: &'static str = "f32";

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const DTYPE: &'static str = "f64";

    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn l2_norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero if either vector is zero.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> f64 {
    let na = l2_norm(a).as_f64();
    let nb = l2_norm(b).as_f64();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b).as_f64() / (na * nb)
}

/// `y += a * x`
#[inline]
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let n = l2_norm(v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    Some(v.iter().map(|x| x / n).collect())
}
