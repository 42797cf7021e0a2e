//! Small dense helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};

/// Largest absolute entry of `m - mᵀ`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Smallest eigenvalue of the symmetric part of a square matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => f64::INFINITY,
        1 => m[(0, 0)],
        _ => {
            let sym = (m + m.transpose()) * 0.5;
            SymmetricEigen::new(sym)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Largest eigenvalue of the symmetric part of a square matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => f64::NEG_INFINITY,
        1 => m[(0, 0)],
        _ => {
            let sym = (m + m.transpose()) * 0.5;
            SymmetricEigen::new(sym)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        }
    }
}

/// Operator 2-norm (largest singular value).
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Solves `sigma · X = rhs` for a symmetric positive-definite `sigma`.
///
/// Returns `Err(min_eigenvalue)` when the smallest eigenvalue of `sigma` is
/// below `r_min`.
pub fn spd_solve(sigma: &DMatrix<f64>, rhs: &DMatrix<f64>, r_min: f64) -> Result<DMatrix<f64>, f64> {
    let lambda = min_eigenvalue(sigma);
    if !(lambda >= r_min) {
        return Err(lambda);
    }
    if sigma.nrows() == 1 {
        return Ok(rhs / sigma[(0, 0)]);
    }
    let mut sym = sigma.clone();
    symmetrize(&mut sym);
    match sym.cholesky() {
        Some(chol) => Ok(chol.solve(rhs)),
        None => Err(lambda),
    }
}

pub fn frobenius_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}
