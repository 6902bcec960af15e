//! Small dense helpers around a lower-triangular factor.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Solve `L y = b` in place for lower-triangular `L`.
pub(crate) fn solve_lower_in_place(l: &DMatrix<f64>, b: &mut [f64]) {
    let m = b.len();
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solve `Lᵀ y = b` in place for lower-triangular `L`.
pub(crate) fn solve_lower_transpose_in_place(l: &DMatrix<f64>, b: &mut [f64]) {
    let m = b.len();
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in i + 1..m {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// `L⁻ᵀ` for lower-triangular `L`.
pub(crate) fn inverse_transpose(l: &DMatrix<f64>) -> DMatrix<f64> {
    let m = l.nrows();
    let mut out = DMatrix::zeros(m, m);
    let mut col = vec![0.0; m];
    for j in 0..m {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        solve_lower_transpose_in_place(l, &mut col);
        for i in 0..m {
            out[(i, j)] = col[i];
        }
    }
    out
}

/// Check that `l` is square, lower triangular, finite, with positive diagonal.
pub(crate) fn validate_cholesky_factor(l: &DMatrix<f64>) -> Result<()> {
    if !l.is_square() {
        return Err(Error::Singular(format!("factor is {}x{}", l.nrows(), l.ncols())));
    }
    let m = l.nrows();
    for i in 0..m {
        for j in 0..m {
            let v = l[(i, j)];
            if !v.is_finite() {
                return Err(Error::Singular(format!("entry ({i}, {j}) is not finite")));
            }
            if j > i && v != 0.0 {
                return Err(Error::Singular(format!("entry ({i}, {j}) above the diagonal is {v}")));
            }
        }
        if l[(i, i)] <= 0.0 {
            return Err(Error::Singular(format!("diagonal entry {i} is {}", l[(i, i)])));
        }
    }
    Ok(())
}

/// Symmetrize, clip eigenvalues from below at `floor`, and return the Cholesky factor.
pub(crate) fn pd_cholesky(s: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("scatter update is not finite".into()));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.min() >= floor {
        if let Some(ch) = sym.cholesky() {
            return Ok(ch.l());
        }
    }
    let clipped = eig.eigenvalues.map(|e| e.max(floor));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let rebuilt = (&rebuilt + rebuilt.transpose()) * 0.5;
    rebuilt
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Singular("scatter update is not positive definite".into()))
}

/// Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() {
        return Err(Error::Singular(format!("scatter is {}x{}", sigma.nrows(), sigma.ncols())));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    sym.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Singular("scatter is not positive definite".into()))
}

pub(crate) fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}
