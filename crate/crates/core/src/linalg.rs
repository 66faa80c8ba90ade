//! Hermitian positive-definite helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance used when checking Hermitian symmetry.
const HERMITIAN_TOL: f64 = 1e-10;

pub fn is_hermitian(m: &CMatrix) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    for i in 0..m.nrows() {
        for j in 0..=i {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > HERMITIAN_TOL * scale {
                return false;
            }
        }
    }
    true
}

/// Lower Cholesky factor `L` with `m = L L^H`.
pub fn cholesky(m: &CMatrix) -> Result<CMatrix> {
    if !is_hermitian(m) {
        return Err(Error::NotPositiveDefinite("matrix is not Hermitian".into()));
    }
    let l = factor(m)?.unpack();
    Ok(l)
}

// nalgebra takes complex square roots of negative pivots instead of
// failing, so every pivot is checked to be real and positive.
fn factor(m: &CMatrix) -> Result<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || d.im.abs() > 1e-12 * d.re.max(1e-300) || !d.re.is_finite() {
            return Err(Error::NotPositiveDefinite(format!("pivot {i} is {d}")));
        }
    }
    Ok(chol)
}

/// `ln det m` for Hermitian positive-definite `m`. The empty matrix has
/// log-determinant zero.
pub fn log_det_hpd(m: &CMatrix) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let l = cholesky(m)?;
    Ok((0..l.nrows()).map(|i| 2.0 * l[(i, i)].norm().ln()).sum())
}

pub fn principal_submatrix(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

fn cross_block(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Covariance of the `target` coordinates given the `given` coordinates
/// (Schur complement `Λ_tt − Λ_tg Λ_gg⁻¹ Λ_gt`).
pub fn conditional_covariance(m: &CMatrix, target: &[usize], given: &[usize]) -> Result<CMatrix> {
    let ltt = principal_submatrix(m, target);
    if given.is_empty() {
        return Ok(ltt);
    }
    let lgg = principal_submatrix(m, given);
    let ltg = cross_block(m, target, given);
    let chol = factor(&lgg)?;
    let solved = chol.solve(&ltg.adjoint());
    let out = ltt - &ltg * solved;
    // restore exact Hermitian symmetry lost to rounding
    Ok((&out + out.adjoint()) * Complex64::new(0.5, 0.0))
}
