//! Small dense complex linear-algebra helpers shared by the solver stages.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Relative singular-value cutoff used for minimum-norm solves.
const RCOND: f64 = 1e-12;

/// Minimum-norm least-squares solution of `a x = b` (columns of `b` solved jointly).
///
/// Singular values below `RCOND * s_max` are treated as zero, so rank-deficient
/// systems return the minimum-norm minimizer.
pub fn lstsq_min_norm(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "lstsq: {} rows vs rhs {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.ncols() == 0 {
        return Ok(CMat::zeros(0, b.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^H");
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = RCOND * s_max;
    // x = V S^+ U^H b
    let mut ub = u.adjoint() * b;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        ub.row_mut(i).scale_mut(inv);
    }
    Ok(v_t.adjoint() * ub)
}

/// Moore-Penrose pseudoinverse via SVD.
pub fn pinv(a: &CMat) -> Result<CMat> {
    lstsq_min_norm(a, &CMat::identity(a.nrows(), a.nrows()))
}

pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `0.5 * (a + a^H)`
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigenvalues and eigenvectors of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(h: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::Dimension(format!("eigen: {}x{} is not square", n, h.ncols())));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigensolver("non-finite entry in input".into()));
    }
    let m = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| {
        let z = h[(i, j)];
        faer::c64::new(z.re, z.im)
    });
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = eig.S();
    let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let u = eig.U();
    let vecs = CMat::from_fn(n, n, |i, j| {
        let z = u[(i, j)];
        c(z.re, z.im)
    });
    Ok((vals, vecs))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &CMat) -> Result<f64> {
    let (vals, _) = hermitian_eigen(&hermitian_part(h))?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}
