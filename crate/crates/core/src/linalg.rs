//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::operators::Vector;

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical { step: None, msg: msg.into() }
}

/// Solve `H x = rhs` for symmetric positive definite `H`.
pub fn spd_solve(h: &DMatrix<f64>, rhs: &Vector) -> Result<Vector> {
    match h.clone().cholesky() {
        Some(c) => Ok(c.solve(rhs)),
        None => general_solve(h, rhs),
    }
}

/// Solve a square system; falls back to the SVD least-squares solution when
/// the matrix is singular (consistent right-hand sides still solve exactly).
pub fn general_solve(m: &DMatrix<f64>, rhs: &Vector) -> Result<Vector> {
    if let Some(x) = m.clone().lu().solve(rhs) {
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let eps = 1e-13 * m.norm().max(1.0);
    m.clone()
        .svd(true, true)
        .solve(rhs, eps)
        .map_err(|e| numerical(format!("linear solve failed: {e}")))
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.is_square()
        && m.iter()
            .enumerate()
            .all(|(idx, v)| idx % m.nrows() == idx / m.nrows() || *v == 0.0)
}

/// Singular values sorted in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Returns `Some(s)` if `m == s * I`.
pub fn scalar_identity_factor(m: &DMatrix<f64>) -> Option<f64> {
    if !m.is_square() || m.nrows() == 0 {
        return None;
    }
    let s = m[(0, 0)];
    if s != 0.0 && is_diagonal(m) && m.diagonal().iter().all(|d| *d == s) {
        Some(s)
    } else {
        None
    }
}

/// Minimum-norm least-squares solution through the SVD.
pub fn svd_solve(m: &DMatrix<f64>, rhs: &Vector) -> Result<Vector> {
    let eps = 1e-12 * m.norm().max(1.0);
    m.clone()
        .svd(true, true)
        .solve(rhs, eps)
        .map_err(|e| numerical(format!("least-squares solve failed: {e}")))
}
