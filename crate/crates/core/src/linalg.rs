//! Small dense linear algebra used by the Newton iterations.
//!
//! Systems here are at most a handful of unknowns (state dimension or
//! invariant count), so everything is dense Gaussian elimination with
//! partial pivoting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type StateVec = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative pivot threshold below which a matrix is declared singular.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &Matrix, b: &StateVec) -> Result<StateVec> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Config(format!(
            "solve_dense: shape mismatch ({}x{} against {})",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if n == 0 {
        return Ok(StateVec::zeros(0));
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return Err(Error::Evaluation {
            what: "matrix entries".into(),
            state: a.iter().copied().collect(),
        });
    }
    let threshold = PIVOT_RTOL * scale;

    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let (p, pivot) = (col..n)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= threshold || pivot == 0.0 {
            return Err(Error::SingularMatrix { pivot, threshold });
        }
        if p != col {
            m.swap_rows(p, col);
            rhs.swap_rows(p, col);
        }
        let d = m[(col, col)];
        for r in col + 1..n {
            let factor = m[(r, col)] / d;
            if factor == 0.0 {
                continue;
            }
            m[(r, col)] = 0.0;
            for c in col + 1..n {
                m[(r, c)] -= factor * m[(col, c)];
            }
            rhs[r] -= factor * rhs[col];
        }
    }

    let mut x = StateVec::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= m[(row, c)] * x[c];
        }
        x[row] = acc / m[(row, row)];
    }
    Ok(x)
}

pub fn max_abs(v: &StateVec) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn all_finite(v: &StateVec) -> bool {
    v.iter().all(|x| x.is_finite())
}
