use super::{dot, l2_norm, Matrix, RngState};
use crate::error::{Error, Result};

/// Uniform direction on the unit sphere in `d` dimensions.
pub fn random_unit(d: usize, rng: &mut RngState) -> Vec<f64> {
    loop {
        let g = rng.normal_vec(d);
        let n = l2_norm(&g);
        if n > 1e-300 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Uniform unit vector on the sphere orthogonal to the unit vector `u`.
///
/// Draws an isotropic Gaussian, removes its `u` component and normalizes;
/// the projection is repeated once to clean up rounding.
pub fn sample_unit_orthogonal(u: &[f64], rng: &mut RngState) -> Result<Vec<f64>> {
    let d = u.len();
    if d < 2 {
        return Err(Error::Dimension(format!(
            "orthogonal complement of a {d}-dim vector is empty"
        )));
    }
    if (l2_norm(u) - 1.0).abs() > 1e-9 {
        return Err(Error::Input("axis must have unit norm".into()));
    }
    let mut g = vec![0.0; d];
    unit_orthogonal_into(u, rng, &mut g);
    Ok(g)
}

/// [`sample_unit_orthogonal`] into a caller buffer, skipping input checks.
pub(crate) fn unit_orthogonal_into(u: &[f64], rng: &mut RngState, g: &mut [f64]) {
    loop {
        g.iter_mut().for_each(|x| *x = rng.normal());
        for _ in 0..2 {
            let c = dot(g, u);
            g.iter_mut().zip(u).for_each(|(gi, ui)| *gi -= c * ui);
        }
        let n = l2_norm(g);
        if n > 1e-8 {
            g.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

/// Haar-random `n×n` orthogonal matrix (Gram-Schmidt on Gaussian rows).
pub fn random_orthogonal(n: usize, rng: &mut RngState) -> Matrix<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut g = rng.normal_vec(n);
        for _ in 0..2 {
            for r in &rows {
                let c = dot(&g, r);
                g.iter_mut().zip(r).for_each(|(gi, ri)| *gi -= c * ri);
            }
        }
        let norm = l2_norm(&g);
        if norm > 1e-8 {
            rows.push(g.into_iter().map(|v| v / norm).collect());
        }
    }
    Matrix::from_rows(&rows).expect("square")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dim_complement_is_two_points() {
        let mut rng = RngState::new(1);
        for _ in 0..50 {
            let s = sample_unit_orthogonal(&[1.0, 0.0], &mut rng).unwrap();
            assert!(s[0].abs() < 1e-12);
            assert!((s[1].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_one_dim() {
        let mut rng = RngState::new(1);
        assert!(matches!(
            sample_unit_orthogonal(&[1.0], &mut rng),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn contract_holds_for_many_samples() {
        let mut rng = RngState::new(2);
        let u = random_unit(16, &mut rng);
        let mut mean = vec![0.0; 16];
        let n = 10_000;
        for _ in 0..n {
            let s = sample_unit_orthogonal(&u, &mut rng).unwrap();
            assert!(dot(&s, &u).abs() <= 1e-10);
            assert!((l2_norm(&s) - 1.0).abs() <= 1e-10);
            mean.iter_mut().zip(&s).for_each(|(m, v)| *m += v / n as f64);
        }
        assert!(l2_norm(&mean) <= 0.05);
    }

    #[test]
    fn orthogonal_matrix_is_orthogonal() {
        let mut rng = RngState::new(4);
        let q = random_orthogonal(12, &mut rng);
        let qqt = q.matmul(&q.transpose()).unwrap();
        assert!(qqt.max_abs_diff(&Matrix::identity(12)) < 1e-12);
    }
}
