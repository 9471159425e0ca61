//! Dense linear-algebra helpers for small problems (oracles, diagnostics).

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::assembly::CsrMatrix;
use crate::error::{Error, Result};

pub fn from_csr(m: &CsrMatrix) -> Mat<f64> {
    let mut d = Mat::zeros(m.nrows, m.ncols);
    for i in 0..m.nrows {
        for (j, v) in m.row(i) {
            d[(i, j)] = v;
        }
    }
    d
}

pub fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn to_vec(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

fn symmetrize(m: &mut Mat<f64>) {
    for i in 0..m.nrows() {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `L⁻¹ A L⁻ᵀ` where `B = L Lᵀ`, so that its spectrum is that of `(A, B)`.
fn congruence(a: &Mat<f64>, b: &Mat<f64>) -> Result<Mat<f64>> {
    let llt = b
        .llt(Side::Lower)
        .map_err(|e| Error::Singular(format!("dense Cholesky failed: {e:?}")))?;
    let l = llt.L();
    let mut x = a.clone();
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut y = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(y.as_mut());
    symmetrize(&mut y);
    Ok(y)
}

/// Eigenvalues of the symmetric pencil `(A, B)` with `B` SPD, ascending.
pub fn generalized_eigenvalues(a: &Mat<f64>, b: &Mat<f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    congruence(a, b)?
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Singular(format!("eigensolver failed: {e:?}")))
}

pub fn symmetric_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    let mut s = a.clone();
    symmetrize(&mut s);
    s.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Singular(format!("eigensolver failed: {e:?}")))
}

/// `A⁻¹ B` for square nonsingular `A`.
pub fn solve(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let lu = a.partial_piv_lu();
    let mut x = b.clone();
    lu.solve_in_place(x.as_mut());
    x
}
