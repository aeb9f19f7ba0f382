//! Small dense kernels on row-major `k x k` buffers.
//!
//! The scoring hot path factors many tiny principal submatrices, so these
//! routines work on flat slices instead of allocating matrix objects.

/// In-place lower Cholesky factorization `A = L Lᵀ` of a row-major
/// symmetric matrix. Only the lower triangle is read; on success it holds `L`
/// and the strict upper triangle is zeroed. Returns `false` when a pivot is
/// not strictly positive (or not finite).
pub fn cholesky_in_place(a: &mut [f64], k: usize) -> bool {
    debug_assert_eq!(a.len(), k * k);
    for j in 0..k {
        let mut d = a[j * k + j];
        for t in 0..j {
            d -= a[j * k + t] * a[j * k + t];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let ljj = d.sqrt();
        a[j * k + j] = ljj;
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for t in 0..j {
                s -= a[i * k + t] * a[j * k + t];
            }
            a[i * k + j] = s / ljj;
        }
        for i in 0..j {
            a[i * k + j] = 0.0;
        }
    }
    true
}

/// `log|A|` of a symmetric positive-definite matrix via its Cholesky factor,
/// `None` if the factorization fails. The empty matrix has determinant 1.
pub fn log_det_spd(mut a: Vec<f64>, k: usize) -> Option<f64> {
    if k == 0 {
        return Some(0.0);
    }
    if !cholesky_in_place(&mut a, k) {
        return None;
    }
    Some(log_det_from_factor(&a, k))
}

/// `Σ log L_ii²` for a lower factor produced by [`cholesky_in_place`].
pub fn log_det_from_factor(l: &[f64], k: usize) -> f64 {
    (0..k).map(|i| 2.0 * l[i * k + i].ln()).sum()
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub fn solve_lower(l: &[f64], k: usize, b: &mut [f64]) {
    for i in 0..k {
        let mut s = b[i];
        for t in 0..i {
            s -= l[i * k + t] * b[t];
        }
        b[i] = s / l[i * k + i];
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn solve_lower_transpose(l: &[f64], k: usize, b: &mut [f64]) {
    for i in (0..k).rev() {
        let mut s = b[i];
        for t in (i + 1)..k {
            s -= l[t * k + i] * b[t];
        }
        b[i] = s / l[i * k + i];
    }
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &[f64], k: usize, b: &mut [f64]) {
    solve_lower(l, k, b);
    solve_lower_transpose(l, k, b);
}
