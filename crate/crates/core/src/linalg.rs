//! Small dense complex linear-algebra helpers on top of `nalgebra`.

pub use nalgebra::Complex;
use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Eigenvalues below this (relative to the spectral radius) are treated as
/// rounding noise and clipped to zero.
pub const EIG_CLIP_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn diag(v: &CVec) -> CMat {
    CMat::from_diagonal(v)
}

/// `diag(v) * m` without forming the diagonal matrix.
pub fn scale_rows(v: &CVec, m: &CMat) -> CMat {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= v[i];
    }
    out
}

/// `m * diag(v)`.
pub fn scale_cols(m: &CMat, v: &CVec) -> CMat {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= v[j];
    }
    out
}

/// `diag(a * b)` computed without the full product.
pub fn diag_of_product(a: &CMat, b: &CMat) -> CVec {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    CVec::from_fn(a.nrows(), |i, _| a.row(i).iter().zip(b.column(i).iter()).map(|(x, y)| x * y).sum())
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().sum()
}

/// `tr(a b)` without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> C64 {
    diag_of_product(a, b).sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖a − b‖_F / max(‖b‖_F, tiny)`.
pub fn rel_frobenius_error(a: &CMat, b: &CMat) -> f64 {
    let denom = frobenius(b).max(f64::MIN_POSITIVE);
    frobenius(&(a - b)) / denom
}

pub fn max_asymmetry(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_hermitian(a: &CMat, tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "hermitian matrix",
            expected: "square".into(),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let scale = a.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let asym = max_asymmetry(a);
    if asym > tol * scale {
        return Err(Error::NonHermitian(asym));
    }
    Ok(())
}

/// Real eigenvalues and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMat) -> Result<(DVector<f64>, CMat)> {
    check_hermitian(a, 1e-12)?;
    let sym = (a + a.adjoint()) * c(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// Principal square root of a Hermitian PSD matrix. Eigenvalues within
/// `EIG_CLIP_TOL` (relative) below zero are clipped; anything more negative is
/// rejected.
pub fn psd_sqrt(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigen(a)?;
    let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let min = vals.min();
    if min < -EIG_CLIP_TOL * radius {
        return Err(Error::NotPsd(min));
    }
    let roots = CVec::from_iterator(vals.len(), vals.iter().map(|&v| c(v.max(0.0).sqrt(), 0.0)));
    let root = scale_cols(&vecs, &roots) * vecs.adjoint();
    Ok((&root + root.adjoint()) * c(0.5, 0.0))
}

/// Clips slightly negative eigenvalues of a Hermitian matrix to zero.
pub fn clip_psd(a: &CMat) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigen(a)?;
    let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let min = vals.min();
    if min < -EIG_CLIP_TOL * radius {
        return Err(Error::NotPsd(min));
    }
    if min >= 0.0 {
        return Ok(a.clone());
    }
    let clipped = CVec::from_iterator(vals.len(), vals.iter().map(|&v| c(v.max(0.0), 0.0)));
    let out = scale_cols(&vecs, &clipped) * vecs.adjoint();
    Ok((&out + out.adjoint()) * c(0.5, 0.0))
}

/// `ln det(a)` for Hermitian positive definite `a`, via Cholesky. Returns
/// `None` when the factorization fails (singular or indefinite input).
pub fn hermitian_logdet(a: &CMat) -> Option<f64> {
    let chol = Cholesky::new(a.clone())?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        let d = l[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// Like [`hermitian_logdet`], but also returns `None` when the smallest
/// squared Cholesky pivot falls below `rcond` times the largest diagonal
/// entry, i.e. when `a` is numerically rank-deficient.
pub fn hermitian_logdet_checked(a: &CMat, rcond: f64) -> Option<f64> {
    let chol = Cholesky::new(a.clone())?;
    let l = chol.l_dirty();
    let max_diag = (0..a.nrows()).map(|i| a[(i, i)].re).fold(0.0f64, f64::max);
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        let d = l[(i, i)].re;
        if !(d > 0.0) || !d.is_finite() || d * d < rcond * max_diag {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// `ln det(a)` from the eigenvalues of a Hermitian matrix; `None` if any
/// eigenvalue is non-positive.
pub fn hermitian_logdet_eig(a: &CMat) -> Result<Option<f64>> {
    let (vals, _) = hermitian_eigen(a)?;
    if vals.iter().any(|&v| !(v > 0.0)) {
        return Ok(None);
    }
    Ok(Some(vals.iter().map(|v| v.ln()).sum()))
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hermitian_inverse(a: &CMat) -> Option<CMat> {
    Cholesky::new(a.clone()).map(|ch| ch.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let i = identity(4);
        assert!(rel_frobenius_error(&psd_sqrt(&i).unwrap(), &i) < 1e-14);

        let d = diag(&CVec::from_vec(vec![c(4.0, 0.0), c(9.0, 0.0)]));
        let r = psd_sqrt(&d).unwrap();
        assert_abs_diff_eq!(r[(0, 0)].re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[(1, 1)].re, 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[(0, 1)].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_rejects_non_hermitian() {
        let mut a = identity(2);
        a[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(psd_sqrt(&a), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let a = diag(&CVec::from_vec(vec![c(1.0, 0.0), c(-0.5, 0.0)]));
        assert!(matches!(psd_sqrt(&a), Err(Error::NotPsd(_))));
    }

    #[test]
    fn logdet_matches_eigen_route() {
        let b = CMat::from_fn(5, 5, |i, j| c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let a = &b * b.adjoint() + identity(5);
        let chol = hermitian_logdet(&a).unwrap();
        let eig = hermitian_logdet_eig(&a).unwrap().unwrap();
        assert_abs_diff_eq!(chol, eig, epsilon = 1e-11);
    }

    #[test]
    fn logdet_of_singular_is_none() {
        let v = CMat::from_fn(3, 1, |i, _| c(i as f64 + 1.0, 0.0));
        let a = &v * v.adjoint();
        assert!(hermitian_logdet_checked(&a, 1e-13).is_none());
        let ones = CMat::from_element(2, 2, c(2.0, 0.0));
        assert!(hermitian_logdet_checked(&ones, 1e-13).is_none());
        assert!(hermitian_logdet_checked(&identity(3), 1e-13).is_some());
    }

    #[test]
    fn diag_product_matches_full_product() {
        let a = CMat::from_fn(3, 4, |i, j| c(i as f64 - j as f64, (i + j) as f64));
        let b = CMat::from_fn(4, 3, |i, j| c((i * j) as f64, 1.0 - i as f64));
        let full = &a * &b;
        let d = diag_of_product(&a, &b);
        for i in 0..3 {
            assert_abs_diff_eq!((d[i] - full[(i, i)]).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
