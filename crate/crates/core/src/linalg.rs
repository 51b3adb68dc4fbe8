//! Small dense linear algebra: LU solve and null vectors.

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major n×n and is overwritten; `b` receives the solution.
/// Returns `None` when a pivot falls below `1e-14` times the matrix scale.
pub fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r * n + k] * b[k];
        }
        b[r] = s / a[r * n + r];
    }
    Some(())
}

/// A unit-norm vector x ≠ 0 with `A x ≈ 0`, for row-major `rows × cols` A,
/// obtained from the reduced row echelon form. `None` if A has full column rank
/// at the working tolerance.
pub fn null_vector(a: &[f64], rows: usize, cols: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), rows * cols);
    let mut m = a.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-11 * scale;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let piv = (r..rows).max_by(|&i, &j| m[i * cols + c].abs().total_cmp(&m[j * cols + c].abs()))?;
        if m[piv * cols + c].abs() <= tol {
            continue;
        }
        for k in 0..cols {
            m.swap(piv * cols + k, r * cols + k);
        }
        let d = m[r * cols + c];
        for k in 0..cols {
            m[r * cols + k] /= d;
        }
        for i in 0..rows {
            if i != r {
                let f = m[i * cols + c];
                if f != 0.0 {
                    for k in 0..cols {
                        m[i * cols + k] -= f * m[r * cols + k];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free = (0..cols).find(|c| !pivots.contains(c))?;
    let mut x = vec![0.0; cols];
    x[free] = 1.0;
    for (row, &pc) in pivots.iter().enumerate() {
        x[pc] = -m[row * cols + free];
    }
    let n = crate::point::norm(&x);
    x.iter_mut().for_each(|v| *v /= n);
    Some(x)
}
