//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{MorseError, Result};

/// Modified Gram-Schmidt on the columns of `frame` with respect to the
/// inner product `<u, v> = u^T g v` (Euclidean when `g` is `None`).
///
/// The triangular factor has a positive diagonal, so the span of every
/// leading set of columns and the orientation of the frame are preserved.
/// Returns `None` when the columns are numerically dependent.
pub fn gram_schmidt(frame: &DMatrix<f64>, g: Option<&DMatrix<f64>>) -> Option<DMatrix<f64>> {
    let mut q = frame.clone();
    let inner = |a: &DVector<f64>, b: &DVector<f64>| match g {
        Some(g) => a.dot(&(g * b)),
        None => a.dot(b),
    };
    for j in 0..q.ncols() {
        let mut v: DVector<f64> = q.column(j).into_owned();
        let scale = inner(&v, &v).sqrt();
        for _ in 0..2 {
            for i in 0..j {
                let qi: DVector<f64> = q.column(i).into_owned();
                let c = inner(&qi, &v);
                v -= qi * c;
            }
        }
        let norm = inner(&v, &v).sqrt();
        if !(norm > 1e-13 * scale.max(f64::MIN_POSITIVE)) || !norm.is_finite() {
            return None;
        }
        q.set_column(j, &(v / norm));
    }
    Some(q)
}

/// Orthonormal basis (as columns, Euclidean) of the null space of `m`.
///
/// Standard basis vectors are projected off the row space in index order,
/// which makes the result deterministic.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for r in 0..m.nrows() {
        let mut v: DVector<f64> = m.row(r).transpose();
        for q in &rows {
            let c = q.dot(&v);
            v -= q * c;
        }
        let norm = v.norm();
        if norm > tol {
            rows.push(v / norm);
        }
    }
    complete_basis(&rows, n, tol)
}

/// Orthonormal complement of the orthonormal vectors `basis` in `R^n`.
pub fn complete_basis(basis: &[DVector<f64>], n: usize, tol: f64) -> DMatrix<f64> {
    let mut all: Vec<DVector<f64>> = basis.to_vec();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let target = n - basis.len().min(n);
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    while out.len() < target {
        candidates.clear();
        for i in 0..n {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            for q in &all {
                let c = q.dot(&v);
                v -= q * c;
            }
            candidates.push((i, v.norm()));
        }
        // Largest residual first; ties resolve to the lowest index.
        let (best, norm) = candidates
            .iter()
            .cloned()
            .fold((usize::MAX, -1.0), |acc, (i, r)| if r > acc.1 + 1e-12 { (i, r) } else { acc });
        if norm <= tol {
            break;
        }
        let mut v = DVector::zeros(n);
        v[best] = 1.0;
        for _ in 0..2 {
            for q in &all {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let v = v.normalize();
        all.push(v.clone());
        out.push(v);
    }
    if out.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&out)
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(b, eps)
        .map_err(|e| MorseError::NonFinite(format!("least-squares solve failed: {e}")))
}

/// Symmetric positive-definite square root via eigendecomposition.
///
/// Fails with `None` when an eigenvalue is below `floor`.
pub fn spd_sqrt(m: &DMatrix<f64>, floor: f64) -> Option<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l >= floor)) {
        return None;
    }
    let sqrt = eig.eigenvalues.map(f64::sqrt);
    Some(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose())
}

/// `sqrt(det(M^T M))` for a tall matrix: the volume of the parallelotope
/// spanned by its columns.
pub fn gram_volume(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    (m.transpose() * m).determinant().max(0.0).sqrt()
}

/// Sign-normalize a vector so that its largest-magnitude coordinate is
/// positive (ties resolve to the lowest coordinate index).
pub fn sign_normalize(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() * (1.0 + 1e-12) + 1e-300 {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
    }
}
