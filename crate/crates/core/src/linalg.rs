//! Dense linear solves used by the decomposition and oracle routines.
//! Exact Gauss-Jordan elimination in rational mode; the same elimination
//! with magnitude pivoting and a zero threshold in float mode.

use crate::scalar::Scalar;

fn pivot_threshold<T: Scalar>(scale: f64) -> f64 {
    if T::EXACT {
        0.0
    } else {
        1e-12 * f64::max(scale, 1.0)
    }
}

fn matrix_scale<T: Scalar>(a: &[Vec<T>]) -> f64 {
    a.iter()
        .flat_map(|row| row.iter())
        .map(|v| v.to_f64().abs())
        .fold(1.0, f64::max)
}

fn treat_as_zero<T: Scalar>(v: &T, threshold: f64) -> bool {
    if T::EXACT {
        v.is_zero()
    } else {
        v.to_f64().abs() <= threshold
    }
}

/// Solves `a x = b` by Gauss-Jordan elimination. Returns `None` when the
/// system is inconsistent; free variables are set to zero otherwise.
pub fn solve_consistent<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let rows = a.len();
    assert_eq!(rows, b.len(), "matrix/vector row mismatch");
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let threshold = pivot_threshold::<T>(matrix_scale(a));

    // Augmented working copy.
    let mut m: Vec<Vec<T>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            assert_eq!(row.len(), cols, "ragged matrix");
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();

    let mut pivot_col_of_row: Vec<usize> = Vec::new();
    let mut row = 0usize;
    for col in 0..cols {
        // Largest pivot keeps float elimination stable; any nonzero works exactly.
        let mut best = row;
        let mut best_mag = -1.0f64;
        for r in row..rows {
            let mag = m[r][col].to_f64().abs();
            if mag > best_mag && !treat_as_zero(&m[r][col], threshold) {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag < 0.0 {
            continue;
        }
        m.swap(row, best);
        let inv = T::one() / m[row][col].clone();
        for c in col..=cols {
            m[row][c] = m[row][c].clone() * inv.clone();
        }
        for r in 0..rows {
            if r != row && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..=cols {
                    let delta = factor.clone() * m[row][c].clone();
                    m[r][c] = m[r][c].clone() - delta;
                }
            }
        }
        pivot_col_of_row.push(col);
        row += 1;
        if row == rows {
            break;
        }
    }

    // A leftover nonzero right-hand side below the pivot rows means no solution.
    for r in row..rows {
        if !treat_as_zero(&m[r][cols], threshold) {
            return None;
        }
    }

    let mut x = vec![T::zero(); cols];
    for (r, &col) in pivot_col_of_row.iter().enumerate() {
        x[col] = m[r][cols].clone();
    }
    Some(x)
}

/// Minimum-norm solution of a consistent system `a x = b` with `a` symmetric
/// positive semidefinite: solve `a^2 y = b`, return `x = a y`. The result
/// lies in the range of `a`, which characterizes the norm minimizer, and
/// `range(a^2) = range(a)` keeps the squared system consistent.
pub fn min_norm_psd_solve<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = a.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let a2: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = T::zero();
                    for k in 0..n {
                        acc = acc + a[i][k].clone() * a[k][j].clone();
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let y = solve_consistent(&a2, b)?;
    Some(
        (0..n)
            .map(|i| {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + a[i][k].clone() * y[k].clone();
                }
                acc
            })
            .collect(),
    )
}

/// `a x` for a dense matrix and vector.
pub fn mat_vec<T: Scalar>(a: &[Vec<T>], x: &[T]) -> Vec<T> {
    a.iter()
        .map(|row| {
            let mut acc = T::zero();
            for (c, v) in row.iter().enumerate() {
                acc = acc + v.clone() * x[c].clone();
            }
            acc
        })
        .collect()
}
