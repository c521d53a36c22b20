//! Dense least squares by Householder QR with column pivoting.
//!
//! Columns are chosen by largest remaining norm, so the diagonal of `R` is
//! non-increasing in magnitude and `|R_kk| / |R_00|` serves as a rank test.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative size of a diagonal entry of `R` below which the matrix is treated
/// as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub x: DVector<f64>,
    /// `‖A x − b‖₂`
    pub residual_norm: f64,
    /// `|R_{c−1,c−1}| / |R_00|`, a cheap lower bound on `1/cond(A)`.
    pub diagonal_ratio: f64,
}

/// Minimizes `‖A x − b‖₂` for `A` with at least as many rows as columns.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LeastSquares> {
    solve_with_tolerance(a, b, RANK_TOLERANCE)
}

pub fn solve_with_tolerance(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<LeastSquares> {
    let (rows, cols) = a.shape();
    if b.len() != rows {
        return Err(Error::DimensionMismatch { what: "right-hand side", expected: rows, got: b.len() });
    }
    if rows < cols {
        return Err(Error::DimensionMismatch { what: "least-squares rows", expected: cols, got: rows });
    }
    if cols == 0 {
        return Ok(LeastSquares { x: DVector::zeros(0), residual_norm: b.norm(), diagonal_ratio: 1.0 });
    }
    let mut r = a.clone();
    let mut rhs = b.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut norms: Vec<f64> = (0..cols).map(|k| r.column(k).norm_squared()).collect();

    for k in 0..cols {
        // pivot on the largest remaining column norm; recomputed to avoid drift
        for (c, n) in norms.iter_mut().enumerate().skip(k) {
            *n = r.column(c).rows(k, rows - k).norm_squared();
        }
        let p = (k..cols).max_by(|&i, &j| norms[i].total_cmp(&norms[j])).unwrap_or(k);
        if p != k {
            r.swap_columns(k, p);
            norms.swap(k, p);
            perm.swap(k, p);
        }
        let alpha_norm = norms[k].sqrt();
        if alpha_norm == 0.0 {
            return Err(Error::RankDeficient { rank: k, cols, ratio: 0.0 });
        }
        let x0 = r[(k, k)];
        let alpha = if x0 >= 0.0 { -alpha_norm } else { alpha_norm };
        let mut v: DVector<f64> = r.column(k).rows(k, rows - k).clone_owned();
        v[0] -= alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 > 0.0 {
            let scale = 2.0 / vnorm2;
            for c in k + 1..cols {
                let f = v.dot(&r.column(c).rows(k, rows - k)) * scale;
                r.column_mut(c).rows_mut(k, rows - k).axpy(-f, &v, 1.0);
            }
            let dot = v.dot(&rhs.rows(k, rows - k));
            rhs.rows_mut(k, rows - k).axpy(-dot * scale, &v, 1.0);
        }
        r[(k, k)] = alpha;
        r.column_mut(k).rows_mut(k + 1, rows - k - 1).fill(0.0);
    }

    let r00 = r[(0, 0)].abs();
    for k in 0..cols {
        let ratio = r[(k, k)].abs() / r00;
        if ratio < tol {
            return Err(Error::RankDeficient { rank: k, cols, ratio });
        }
    }
    let diagonal_ratio = r[(cols - 1, cols - 1)].abs() / r00;

    let mut y = DVector::zeros(cols);
    for k in (0..cols).rev() {
        let mut s = rhs[k];
        for c in k + 1..cols {
            s -= r[(k, c)] * y[c];
        }
        y[k] = s / r[(k, k)];
    }
    let mut x = DVector::zeros(cols);
    for (k, &orig) in perm.iter().enumerate() {
        x[orig] = y[k];
    }
    let residual_norm = rhs.rows(cols, rows - cols).norm();
    Ok(LeastSquares { x, residual_norm, diagonal_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let sol = solve(&a, &(&a * &x)).unwrap();
        assert!((sol.x - x).amax() < 1e-14);
        assert!(sol.residual_norm < 1e-14);
    }

    #[test]
    fn line_fit_matches_normal_equations() {
        // fit y = c0 + c1 t through four points
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 2.0, 4.0];
        let a = DMatrix::from_fn(4, 2, |i, k| if k == 0 { 1.0 } else { t[i] });
        let b = DVector::from_row_slice(&y);
        let sol = solve(&a, &b).unwrap();
        // closed form: slope 0.9, intercept 0.9
        assert!((sol.x[0] - 0.9).abs() < 1e-14);
        assert!((sol.x[1] - 0.9).abs() < 1e-14);
        let res = (&a * &sol.x - &b).norm();
        assert!((res - sol.residual_norm).abs() < 1e-14);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(solve(&a, &b), Err(Error::RankDeficient { rank: 1, cols: 2, .. })));
    }

    #[test]
    fn shape_checks() {
        let a = DMatrix::zeros(2, 3);
        assert!(solve(&a, &DVector::zeros(2)).is_err());
        let a = DMatrix::identity(3, 3);
        assert!(solve(&a, &DVector::zeros(2)).is_err());
    }
}
