//! Small dense solvers: Gaussian elimination with partial pivoting and a
//! normal-equations least-squares fit. The systems here are tiny (5x5 ring
//! weight solve, per-action basis regressions), so no external solver is
//! warranted.

use crate::error::{CoreError, Result};

/// Solve A x = b in place (A is n*n row-major). Returns an error when a pivot
/// collapses below `tiny`.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let tiny = 1e-300;

    for col in 0..n {
        let mut pivot = col;
        let mut best = m[col * n + col].abs();
        for r in (col + 1)..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best < tiny {
            return Err(CoreError::DegenerateParameters(format!(
                "singular matrix at column {col}"
            )));
        }
        if pivot != col {
            for c in 0..n {
                m.swap(col * n + c, pivot * n + c);
            }
            rhs.swap(col, pivot);
        }
        let diag = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / diag;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
            rhs[r] -= f * rhs[col];
        }
    }

    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in (r + 1)..n {
            acc -= m[r * n + c] * x[c];
        }
        x[r] = acc / m[r * n + r];
    }
    Ok(x)
}

/// Infinity-norm condition number estimate via the explicit inverse. Fine for
/// the 5x5 systems this crate solves.
pub fn condition_inf(a: &[f64], n: usize) -> Result<f64> {
    let norm_a = inf_norm(a, n);
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = solve(a, &e, n)?;
        for r in 0..n {
            inv[r * n + col] = x[r];
        }
    }
    Ok(norm_a * inf_norm(&inv, n))
}

fn inf_norm(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|r| (0..n).map(|c| a[r * n + c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Least squares min ||X w - y||^2 via normal equations. X is rows x cols
/// row-major. Errors if X^T X is singular (rank-deficient basis).
pub fn lstsq(x: &[f64], y: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    assert_eq!(x.len(), rows * cols);
    assert_eq!(y.len(), rows);
    let mut xtx = vec![0.0; cols * cols];
    let mut xty = vec![0.0; cols];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        for i in 0..cols {
            xty[i] += row[i] * y[r];
            for j in i..cols {
                xtx[i * cols + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..cols {
        for j in 0..i {
            xtx[i * cols + j] = xtx[j * cols + i];
        }
    }
    let cond = condition_inf(&xtx, cols)
        .map_err(|_| CoreError::RankDeficient("normal matrix is singular".into()))?;
    if !cond.is_finite() || cond > 1e12 {
        return Err(CoreError::RankDeficient(format!(
            "normal matrix condition {cond:.3e}"
        )));
    }
    solve(&xtx, &xty, cols)
}
