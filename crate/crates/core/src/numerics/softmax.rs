use super::{Matrix, Real};

/// Numerically stable softmax over a slice, in place.
pub fn softmax_in_place<T: Real>(x: &mut [T]) {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise softmax of an `L×L` score matrix under a causal mask: entries
/// above the diagonal are ignored and returned as exactly zero.
pub fn softmax_causal<T: Real>(scores: &Matrix<T>) -> Matrix<T> {
    let l = scores.rows();
    debug_assert_eq!(l, scores.cols());
    let mut out = Matrix::zeros(l, l);
    for i in 0..l {
        let row = out.row_mut(i);
        row[..=i].copy_from_slice(&scores.row(i)[..=i]);
        softmax_in_place(&mut row[..=i]);
    }
    out
}
