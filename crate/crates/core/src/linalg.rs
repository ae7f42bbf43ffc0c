//! Dense complex linear algebra helpers shared by the other modules.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat3 = Matrix3<C64>;
pub type CMat = DMatrix<C64>;

/// Ceiling on the 1-norm condition estimate accepted by [`inverse_checked`].
pub const COND_CEILING: f64 = 1e14;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `alpha * a * b + beta * c` through the blocked complex kernel.
pub fn gemm_into(alpha: C64, a: &CMat, b: &CMat, beta: C64, out: &mut CMat) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(out.shape(), (m, n), "output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        *out *= beta;
        return;
    }
    // SAFETY: Complex64 is repr(C) with two f64 fields, layout-identical to [f64; 2].
    // DMatrix storage is contiguous column-major, so row stride 1, column stride nrows.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [beta.re, beta.im],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), b.ncols());
    gemm_into(C64::new(1.0, 0.0), a, b, C64::new(0.0, 0.0), &mut out);
    out
}

/// `a^* b`
pub fn matmul_ah(a: &CMat, b: &CMat) -> CMat {
    matmul(&a.adjoint(), b)
}

/// `a b^*`
pub fn matmul_bh(a: &CMat, b: &CMat) -> CMat {
    matmul(a, &b.adjoint())
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn one_norm(a: &CMat) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value of a 3x3 matrix.
pub fn norm3(a: &Mat3) -> f64 {
    let g = a.adjoint() * a;
    let ev = SymmetricEigen::new(g).eigenvalues;
    ev.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}

/// `max(1, ||a||)`
pub fn bullet(x: f64) -> f64 {
    x.max(1.0)
}

pub fn frob3(a: &Mat3) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value of a general matrix.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Spectral norm of a Hermitian matrix from its eigenvalues.
pub fn hermitian_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0, |acc: f64, x| acc.max(x.abs()))
}

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// LU inverse with a 1-norm condition estimate capped at `cond_max`.
pub fn inverse_checked(a: &CMat, cond_max: f64) -> Result<CMat> {
    if !a.is_square() {
        return Err(Error::Singular("non-square matrix".into()));
    }
    let inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("LU factorization failed".into()))?;
    let cond = one_norm(a) * one_norm(&inv);
    if !cond.is_finite() || cond > cond_max {
        return Err(Error::IllConditioned { cond, limit: cond_max });
    }
    Ok(inv)
}

pub fn inverse3(a: &Mat3, cond_max: f64) -> Result<Mat3> {
    let inv = a
        .try_inverse()
        .ok_or_else(|| Error::Singular("3x3 block not invertible".into()))?;
    let cond = norm3(a) * norm3(&inv);
    if !cond.is_finite() || cond > cond_max {
        return Err(Error::IllConditioned { cond, limit: cond_max });
    }
    Ok(inv)
}

pub fn is_hermitian(a: &CMat) -> bool {
    let n = a.nrows();
    a.is_square() && (0..n).all(|i| (0..n).all(|j| a[(i, j)] == a[(j, i)].conj()))
}

pub fn diag3(a: C64, b: C64, d: C64) -> Mat3 {
    Mat3::from_diagonal(&nalgebra::Vector3::new(a, b, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, m: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(n, m, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn gemm_matches_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(7, 5, &mut rng);
        let b = random(5, 9, &mut rng);
        let diff = &matmul(&a, &b) - &a * &b;
        assert!(max_abs(&diff) < 1e-13);
        let d = random(7, 4, &mut rng);
        let diff = &matmul_ah(&a, &d) - a.adjoint() * &d;
        assert!(max_abs(&diff) < 1e-13);
    }

    #[test]
    fn norm3_of_diagonal() {
        let d = diag3(c(3.0, 4.0), c(-1.0, 0.0), c(0.0, 2.0));
        assert!((norm3(&d) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(6, 6, &mut rng);
        let h = &a + a.adjoint();
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            6,
            vals.iter().map(|&x| c(x, 0.0)),
        ));
        let rec = &vecs * d * vecs.adjoint();
        assert!(max_abs(&(rec - h)) < 1e-12);
    }

    #[test]
    fn singular_inverse_refused() {
        let a = CMat::from_element(3, 3, c(1.0, 0.0));
        assert!(inverse_checked(&a, COND_CEILING).is_err());
    }
}
