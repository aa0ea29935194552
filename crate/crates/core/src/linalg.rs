//! Small dense helpers shared by the Krylov solvers.

use nalgebra::{DMatrix, DVector};

/// Orthogonalize `v` against the orthonormal columns in `basis` using two
/// passes of classical Gram-Schmidt. Returns the norm of `v` before the first
/// pass, for breakdown detection relative to the input size.
pub fn cgs2(basis: &[DVector<f64>], v: &mut DVector<f64>) -> f64 {
    let before = v.norm();
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|b| b.dot(v)).collect();
        for (b, c) in basis.iter().zip(coeffs) {
            v.axpy(-c, b, 1.0);
        }
    }
    before
}

/// Stack a list of equally sized columns into a matrix.
pub fn columns_to_matrix(rows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Minimum-norm least-squares solution of `a x = rhs` through an SVD with
/// relative singular value cutoff `rcond`.
pub fn lstsq(a: &DMatrix<f64>, rhs: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return DVector::zeros(a.ncols());
    }
    svd.solve(rhs, rcond * smax)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Largest absolute deviation of `m` from the identity.
pub fn max_abs_from_identity(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn mean_of(vectors: &[&DVector<f64>]) -> Option<DVector<f64>> {
    let first = vectors.first()?;
    let mut acc = DVector::zeros(first.len());
    for v in vectors {
        acc += *v;
    }
    Some(acc / vectors.len() as f64)
}
