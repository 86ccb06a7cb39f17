//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Singular values, largest first. Empty matrices have none.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Trace (nuclear) norm, the sum of singular values.
pub fn trace_norm(m: &CMat) -> f64 {
    singular_values(m).iter().sum()
}

/// Hilbert–Schmidt (Frobenius) norm.
pub fn hs_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn min_singular(m: &CMat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// `σ_max / σ_min`, infinite for singular input.
pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Frobenius norm of `m - m*`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    hs_norm(&(m - m.adjoint()))
}

/// Inverse of `m`, refused when the condition number exceeds `cond_limit`.
pub fn checked_inverse(m: &CMat, cond_limit: f64) -> Option<CMat> {
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    if condition_number(m) > cond_limit {
        return None;
    }
    m.clone().try_inverse()
}

/// Inverse of `m`, refused when `σ_min(m)` is negligible against `scale`
/// (the size of the terms `m` was built from) or the condition number
/// exceeds `cond_limit`. For `1×1` matrices the condition number alone
/// cannot detect cancellation.
pub fn scaled_inverse(m: &CMat, scale: f64, cond_limit: f64) -> Option<CMat> {
    if m.nrows() > 0 && min_singular(m) * cond_limit <= scale {
        return None;
    }
    checked_inverse(m, cond_limit)
}

/// Solves `m x = rhs` by LU, refusing ill-conditioned systems.
pub fn checked_solve(m: &CMat, rhs: &CMat, cond_limit: f64) -> Option<CMat> {
    if m.nrows() == 0 {
        return Some(rhs.clone());
    }
    if condition_number(m) > cond_limit {
        return None;
    }
    m.clone().lu().solve(rhs)
}

pub fn det(m: &CMat) -> C64 {
    if m.nrows() == 0 {
        return real(1.0);
    }
    m.clone().lu().determinant()
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order; the columns of the returned matrix are the
/// corresponding orthonormal eigenvectors.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    // symmetrize first so roundoff in the input does not leak into the solver
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let n = m.nrows();
    let mut d = zeros(n, n);
    for (k, v) in vals.iter().enumerate() {
        d[(k, k)] = real(v.max(0.0).sqrt());
    }
    &vecs * d * vecs.adjoint()
}

/// Orthonormal basis of the numerical null space: right singular vectors
/// whose singular value is at most `threshold`.
pub fn null_space(m: &CMat, threshold: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    // pad to square so the SVD exposes the full right singular basis
    let rows = m.nrows().max(n);
    let mut padded = zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let cols: Vec<CVec> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(k, _)| v_t.row(k).adjoint())
        .collect();
    if cols.is_empty() {
        return zeros(n, 0);
    }
    CMat::from_columns(&cols)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Scalar `1×1` matrix.
pub fn scalar(z: C64) -> CMat {
    CMat::from_element(1, 1, z)
}

/// Builds a matrix from row-major complex entries.
pub fn from_rows(rows: usize, cols: usize, data: &[C64]) -> CMat {
    CMat::from_row_slice(rows, cols, data)
}
