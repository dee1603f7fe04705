//! Minimal dense symmetric linear algebra for the small systems this crate
//! solves (Newton steps and the Fisher information matrix, dimension ≤ ~10).
//! Matrices are row-major `Vec<f64>`.

/// Cholesky factor L (lower, row-major) of a symmetric matrix, or the index
/// and value of the first non-positive pivot.
pub(crate) fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>, (usize, f64)> {
    debug_assert_eq!(a.len(), d * d);
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err((i, s));
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Solve L Lᵀ x = b given the Cholesky factor.
pub(crate) fn chol_solve(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            x[i] -= l[i * d + k] * x[k];
        }
        x[i] /= l[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            x[i] -= l[k * d + i] * x[k];
        }
        x[i] /= l[i * d + i];
    }
    x
}

/// Full inverse of L Lᵀ from the Cholesky factor.
pub(crate) fn chol_inverse(l: &[f64], d: usize) -> Vec<f64> {
    let mut inv = vec![0.0; d * d];
    let mut e = vec![0.0; d];
    for j in 0..d {
        e.fill(0.0);
        e[j] = 1.0;
        let col = chol_solve(l, d, &e);
        for i in 0..d {
            inv[i * d + j] = col[i];
        }
    }
    inv
}
