use super::Real;
use crate::error::{Error, Result};

pub const DEFAULT_RMS_EPS: f64 = 1e-6;

/// Norm factor `sqrt(mean(x²) + eps)`.
#[inline]
pub fn rms<T: Real>(x: &[T], eps: T) -> T {
    let d = T::of(x.len() as f64);
    (super::dot(x, x) / d + eps).sqrt()
}

/// `scale ⊙ x / sqrt(mean(x²) + eps)`.
pub fn rms_norm<T: Real>(x: &[T], scale: Option<&[T]>, eps: T) -> Result<Vec<T>> {
    if x.is_empty() {
        return Err(Error::Dimension("rms_norm of an empty vector".into()));
    }
    if eps < T::zero() {
        return Err(Error::Input("negative eps".into()));
    }
    if let Some(s) = scale {
        if s.len() != x.len() {
            return Err(Error::Dimension(format!(
                "scale has length {}, input {}",
                s.len(),
                x.len()
            )));
        }
    }
    let r = rms(x, eps);
    if r == T::zero() {
        return Err(Error::DegenerateInput("zero vector with eps = 0".into()));
    }
    let inv = T::one() / r;
    Ok(match scale {
        Some(s) => x.iter().zip(s).map(|(&xi, &si)| si * xi * inv).collect(),
        None => x.iter().map(|&xi| xi * inv).collect(),
    })
}

/// Jacobian-vector product of the unscaled, eps-free RMS normalization:
/// `dx / r − (xᵀdx / (d·r³)) · x`.
pub fn rms_norm_jvp<T: Real>(x: &[T], dx: &[T]) -> Result<Vec<T>> {
    if x.len() != dx.len() {
        return Err(Error::Dimension(format!(
            "x has length {}, dx {}",
            x.len(),
            dx.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Dimension("empty vector".into()));
    }
    let r = rms(x, T::zero());
    if r == T::zero() {
        return Err(Error::DegenerateInput("zero vector".into()));
    }
    let d = T::of(x.len() as f64);
    let coef = super::dot(x, dx) / (d * r * r * r);
    Ok(x.iter().zip(dx).map(|(&xi, &dxi)| dxi / r - coef * xi).collect())
}

/// Backward pass of `scale ⊙ x / r(x)`. Returns `dx` and accumulates into
/// `dscale` when a scale is present. The Jacobian is symmetric, so the
/// vector-Jacobian product has the same form as the JVP.
pub fn rms_norm_backward<T: Real>(x: &[T], scale: &[T], eps: T, dout: &[T], dscale: &mut [T]) -> Vec<T> {
    let r = rms(x, eps);
    let inv = T::one() / r;
    let d = T::of(x.len() as f64);
    let mut dn = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        dscale[i] += dout[i] * x[i] * inv;
        dn.push(dout[i] * scale[i]);
    }
    let coef = super::dot(x, &dn) / (d * r * r * r);
    x.iter()
        .zip(&dn)
        .map(|(&xi, &dni)| dni * inv - coef * xi)
        .collect()
}
