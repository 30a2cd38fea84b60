use crate::error::{Error, Result};
use crate::numerics::Real;

fn rotate<T: Real>(v: &[T], position: usize, theta: f64, sign: f64) -> Result<Vec<T>> {
    let hd = v.len();
    if !hd.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "rotary embedding needs even head_dim, got {hd}"
        )));
    }
    let mut out = vec![T::zero(); hd];
    for i in 0..hd / 2 {
        let freq = theta.powf(-2.0 * i as f64 / hd as f64);
        let angle = sign * position as f64 * freq;
        let (s, c) = (T::of(angle.sin()), T::of(angle.cos()));
        let (a, b) = (v[2 * i], v[2 * i + 1]);
        out[2 * i] = a * c - b * s;
        out[2 * i + 1] = a * s + b * c;
    }
    Ok(out)
}

/// Rotates consecutive pairs `(2i, 2i+1)` by `position · theta^(−2i/head_dim)`.
pub fn rope_apply<T: Real>(v: &[T], position: usize, theta: f64) -> Result<Vec<T>> {
    rotate(v, position, theta, 1.0)
}

/// Transpose of [`rope_apply`]; used by the backward pass.
pub fn rope_apply_inverse<T: Real>(v: &[T], position: usize, theta: f64) -> Result<Vec<T>> {
    rotate(v, position, theta, -1.0)
}


/// Precomputed rotation angles for one sequence length and head size.
pub(crate) struct RopeTable<T> {
    half: usize,
    cos: Vec<T>,
    sin: Vec<T>,
}

impl<T: Real> RopeTable<T> {
    pub(crate) fn new(len: usize, head_dim: usize, theta: f64) -> Self {
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(len * half);
        let mut sin = Vec::with_capacity(len * half);
        for p in 0..len {
            for i in 0..half {
                let angle = p as f64 * theta.powf(-2.0 * i as f64 / head_dim as f64);
                cos.push(T::of(angle.cos()));
                sin.push(T::of(angle.sin()));
            }
        }
        Self { half, cos, sin }
    }

    /// Rotates one head slice in place; `inverse` applies the transpose.
    pub(crate) fn apply(&self, v: &mut [T], position: usize, inverse: bool) {
        let base = position * self.half;
        for i in 0..self.half {
            let c = self.cos[base + i];
            let s = if inverse {
                -self.sin[base + i]
            } else {
                self.sin[base + i]
            };
            let (a, b) = (v[2 * i], v[2 * i + 1]);
            v[2 * i] = a * c - b * s;
            v[2 * i + 1] = a * s + b * c;
        }
    }
}
