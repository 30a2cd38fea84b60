use std::fmt::Write as _;

use crate::numerics::DenseMatrix;

/// CSV with a `row` label column followed by one column per matrix column.
pub fn matrix_csv(m: &DenseMatrix, row_labels: &[String]) -> String {
    let mut s = String::from("row");
    for j in 0..m.cols() {
        let _ = write!(s, ",{j}");
    }
    s.push('\n');
    for i in 0..m.rows() {
        match row_labels.get(i) {
            Some(l) => s.push_str(l),
            None => {
                let _ = write!(s, "{i}");
            }
        }
        for v in m.row(i) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// 8-bit binary PGM; each pixel is `round(255·score)` clamped to `[0, 255]`.
/// Rows of the matrix are image rows.
pub fn pgm_p5(scores: &DenseMatrix) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", scores.cols(), scores.rows()).into_bytes();
    out.extend(scores.as_slice().iter().map(|&v| {
        let p = (255.0 * v).round();
        if p.is_nan() {
            0
        } else {
            p.clamp(0.0, 255.0) as u8
        }
    }));
    out
}

/// PGM of `m / max(m)`, for nonnegative data such as norms.
pub fn scaled_pgm(m: &DenseMatrix) -> Vec<u8> {
    let max = m.as_slice().iter().copied().fold(0.0, f64::max);
    let mut s = m.clone();
    if max > 0.0 {
        s.scale(1.0 / max);
    }
    pgm_p5(&s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_and_clamping() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 0.5, 1.0], vec![-1.0, 2.0, 0.002]]).unwrap();
        let p = pgm_p5(&m);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&p[..header.len()], header);
        assert_eq!(&p[header.len()..], &[0, 128, 255, 0, 255, 1]);
    }

    #[test]
    fn csv_layout() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(matrix_csv(&m, &["0.5".into()]), "row,0,1\n0.5,1,2\n");
    }
}
