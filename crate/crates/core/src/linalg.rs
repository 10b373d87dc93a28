//! Dense symmetric linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Eigenpairs of a symmetric matrix, ascending; column `i` of the returned
/// matrix belongs to eigenvalue `i`.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == m.ncols() && is_symmetric(m, 0.0) {
        return sym_eigenvalues(m).iter().fold(0.0, |acc, v| acc.max(v.abs()));
    }
    m.clone().singular_values().max()
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= rel_tol * scale))
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Solve `(m - shift) X = rhs` with partially pivoted LU.
///
/// Banded, decaying solutions keep componentwise relative accuracy with this
/// route, which the resolvent decay diagnostics depend on.
pub fn shifted_solve(m: &DMatrix<f64>, shift: f64, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(DMatrix::zeros(0, rhs.ncols()));
    }
    let mut shifted = m.clone();
    for i in 0..shifted.nrows() {
        shifted[(i, i)] -= shift;
    }
    shifted.lu().solve(rhs)
}

pub fn shifted_solve_vec(m: &DMatrix<f64>, shift: f64, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let r = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    shifted_solve(m, shift, &r).map(|x| x.column(0).into_owned())
}

/// Smallest distance between `lambda` and the spectrum of symmetric `m`.
pub fn spectral_gap(m: &DMatrix<f64>, lambda: f64) -> f64 {
    sym_eigenvalues(m).iter().fold(f64::INFINITY, |acc, &v| acc.min((v - lambda).abs()))
}

/// Smallest pairwise difference of an ascending list.
pub fn min_spacing(sorted: &[f64]) -> f64 {
    sorted.windows(2).fold(f64::INFINITY, |acc, w| acc.min(w[1] - w[0]))
}
