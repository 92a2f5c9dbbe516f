//! Dense reference evaluation of `phi_0` and `phi_1` by Taylor series with
//! scaling and squaring. Only meant for small matrices (verification).

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

pub const DENSE_PHI_MAX_DIM: usize = 256;

fn norm_1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(x)` by Taylor series on `x / 2^s` followed by `s` squarings.
pub fn expm_taylor(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let norm = norm_1(x);
    let mut s = 0i32;
    if norm > 0.25 {
        s = (norm / 0.25).log2().ceil() as i32;
    }
    let scaled = x * 2f64.powi(-s);
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if norm_1(&term) <= f64::EPSILON * 1e-3 * norm_1(&sum) {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Full matrix `phi_k(dt * a)` for `k` in `{0, 1}`.
///
/// `phi_1` is read off the upper-right block of `exp([[dt*A, I], [0, 0]])`,
/// so no inverse of `A` is ever formed.
pub fn dense_phi(a: &DMatrix<f64>, k: u8, dt: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(invalid("dense_phi: matrix not square"));
    }
    if n > DENSE_PHI_MAX_DIM {
        return Err(invalid(format!("dense_phi: dimension {n} exceeds {DENSE_PHI_MAX_DIM}")));
    }
    match k {
        0 => Ok(expm_taylor(&(a * dt))),
        1 => {
            let mut aug = DMatrix::<f64>::zeros(2 * n, 2 * n);
            aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
            aug.view_mut((0, n), (n, n)).fill_with_identity();
            let e = expm_taylor(&aug);
            Ok(e.view((0, n), (n, n)).into_owned())
        }
        _ => Err(invalid(format!("dense_phi: unsupported order {k}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_gives_identity() {
        let z = DMatrix::<f64>::zeros(3, 3);
        for k in 0..=1 {
            assert_eq!(dense_phi(&z, k, 1.0).unwrap(), DMatrix::identity(3, 3));
        }
    }

    #[test]
    fn nilpotent_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = dense_phi(&a, 0, 1.0).unwrap();
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));
    }

    #[test]
    fn phi1_of_ln2() {
        let ln2 = std::f64::consts::LN_2;
        let a = DMatrix::from_diagonal_element(1, 1, ln2);
        let p = dense_phi(&a, 1, 1.0).unwrap();
        assert!((p[(0, 0)] - 1.0 / ln2).abs() < 1e-13);
    }

    #[test]
    fn scalar_exponentials() {
        for &z in &[-30.0, -3.0, -0.1, 0.7, 5.0] {
            let a = DMatrix::from_diagonal_element(1, 1, z);
            let e0 = dense_phi(&a, 0, 1.0).unwrap()[(0, 0)];
            let e1 = dense_phi(&a, 1, 1.0).unwrap()[(0, 0)];
            let ez = f64::exp(z);
            assert!(((e0 - ez) / ez).abs() < 1e-13, "z={z}");
            assert!(((e1 - f64::exp_m1(z) / z) / e1).abs() < 1e-13, "z={z}");
        }
    }

    #[test]
    fn rejects_large_or_bad_order() {
        let big = DMatrix::<f64>::zeros(257, 257);
        assert!(dense_phi(&big, 0, 1.0).is_err());
        assert!(dense_phi(&DMatrix::zeros(2, 2), 2, 1.0).is_err());
    }
}
