//! Small dense helpers on row-major `Vec<T>` matrices. Dimensions here never
//! exceed the algebra cap, so nothing is blocked or vectorized.

use crate::scalar::{dot, norm2, Scalar};

/// One-sided Jacobi SVD of an `m x n` row-major matrix (any `m`).
///
/// Returns the singular values and the right singular vectors as columns of
/// an `n x n` row-major orthogonal matrix. Singular values are unsorted;
/// entry `j` pairs with column `j`.
pub fn jacobi_svd<T: Scalar>(a: &[T], m: usize, n: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(a.len(), m * n);
    // column-major working copy
    let mut cols: Vec<Vec<T>> = (0..n)
        .map(|j| (0..m).map(|i| a[i * n + j]).collect())
        .collect();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let xp = cols[p][i];
                    let xq = cols[q][i];
                    cols[p][i] = c * xp - s * xq;
                    cols[q][i] = s * xp + c * xq;
                }
                for i in 0..n {
                    let vp = v[i * n + p];
                    let vq = v[i * n + q];
                    v[i * n + p] = c * vp - s * vq;
                    v[i * n + q] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sv = cols.iter().map(|c| norm2(c)).collect();
    (sv, v)
}

/// Gram-Schmidt over `candidates` in order, keeping vectors whose residual
/// norm exceeds `tol`. Returns orthonormal vectors.
pub fn gram_schmidt<T: Scalar>(candidates: &[Vec<T>], tol: T) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    for c in candidates {
        let mut w = c.clone();
        // two passes for stability
        for _ in 0..2 {
            for b in &basis {
                let d = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= d * *bi;
                }
            }
        }
        let nrm = norm2(&w);
        if nrm > tol {
            basis.push(w.into_iter().map(|x| x / nrm).collect());
        }
    }
    basis
}

/// Inverse of an `n x n` row-major matrix by Gauss-Jordan with partial
/// pivoting. `None` when a pivot falls below `tol`.
pub fn invert<T: Scalar>(a: &[T], n: usize, tol: T) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&r1, &r2| {
            m[r1 * n + col]
                .abs()
                .partial_cmp(&m[r2 * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv * n + col].abs() <= tol {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
                inv.swap(piv * n + j, col * n + j);
            }
        }
        let d = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                m[r * n + j] = m[r * n + j] - f * m[col * n + j];
                inv[r * n + j] = inv[r * n + j] - f * inv[col * n + j];
            }
        }
    }
    Some(inv)
}

/// `y = A x` for row-major `A` of shape `rows x cols`.
pub fn mat_vec<T: Scalar>(a: &[T], rows: usize, cols: usize, x: &[T]) -> Vec<T> {
    (0..rows)
        .map(|i| (0..cols).map(|j| a[i * cols + j] * x[j]).sum())
        .collect()
}

/// `y = A^T x` for row-major `A` of shape `rows x cols`.
pub fn mat_t_vec<T: Scalar>(a: &[T], rows: usize, cols: usize, x: &[T]) -> Vec<T> {
    (0..cols)
        .map(|j| (0..rows).map(|i| a[i * cols + j] * x[i]).sum())
        .collect()
}
