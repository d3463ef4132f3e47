//! Largest real part of the eigenvalues of a real nonsymmetric matrix.

use nalgebra::{DMatrix, Schur};

use crate::sparse::CsrMatrix;

const SCHUR_EPS: f64 = 1e-12;

/// `max Re λ` over all (complex) eigenvalues, via a dense real Schur form.
pub fn max_real_eigenvalue(m: &CsrMatrix) -> Option<f64> {
    max_real_eigenvalue_dense(m.to_dense())
}

pub fn max_real_eigenvalue_dense(m: DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 {
        return None;
    }
    let schur = Schur::try_new(m, SCHUR_EPS, 0)?;
    schur
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(None, |acc: Option<f64>, re| Some(acc.map_or(re, |a| a.max(re))))
}
