//! Solver for the implicit one-step relations `X = G(X)` of the midpoint and
//! discrete-gradient schemes.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, max_abs, solve_dense, Matrix, StateVec};
use crate::verify::finite_diff_jacobian;

#[derive(Debug, Clone, Copy)]
pub struct ImplicitOptions {
    pub tol: f64,
    pub max_iter: usize,
}

/// Where the solve happens, for diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct SolveContext<'a> {
    pub solver: &'static str,
    pub t: f64,
    pub h: f64,
    pub x: &'a StateVec,
}

impl SolveContext<'_> {
    fn fail(&self, iterations: usize, residual: f64) -> Error {
        Error::Nonconvergence {
            solver: self.solver,
            iterations,
            residual,
            t: self.t,
            h: self.h,
            state: self.x.iter().copied().collect(),
        }
    }
}

/// Finds a fixed point of `g` starting from `guess`.
///
/// Plain fixed-point iteration runs for the first half of the iteration
/// budget; if it has not converged by then (or blew up) the remaining budget
/// goes to damped Newton on `F(X) = X − G(X)` with a central-difference
/// Jacobian. Convergence means `|X − G(X)|∞ ≤ tol · max(1, |x|∞)`.
pub fn solve_fixed_point<G>(g: G, guess: StateVec, opts: ImplicitOptions, ctx: SolveContext<'_>) -> Result<StateVec>
where
    G: Fn(&StateVec) -> StateVec,
{
    let scale = max_abs(ctx.x).max(1.0);
    let tol = opts.tol * scale;
    let fixed_budget = (opts.max_iter / 2).max(1);

    let mut x = guess;
    let mut used = 0;
    let mut residual = f64::INFINITY;
    while used < fixed_budget {
        let next = g(&x);
        used += 1;
        if !all_finite(&next) {
            break;
        }
        residual = max_abs(&(&next - &x));
        x = next;
        if residual <= tol {
            return Ok(x);
        }
    }
    if !all_finite(&x) || residual > 1e3 * scale {
        x = ctx.x.clone();
    }

    let f = |y: &StateVec| y - g(y);
    let mut fx = f(&x);
    let mut norm = max_abs(&fx);
    let n = x.len();
    while used < opts.max_iter {
        if norm <= tol {
            return Ok(x);
        }
        used += 1;
        let eps = 1e-7 * max_abs(&x).max(1.0);
        let jac: Matrix = Matrix::identity(n, n) - finite_diff_jacobian(&g, &x, eps);
        let delta = match solve_dense(&jac, &(-&fx)) {
            Ok(d) => d,
            Err(_) => return Err(ctx.fail(used, norm)),
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = &x + &delta * alpha;
            let ft = f(&trial);
            let nt = max_abs(&ft);
            if nt.is_finite() && nt < norm {
                x = trial;
                fx = ft;
                norm = nt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No descent at roundoff level: accept if already within tolerance.
            break;
        }
    }
    if norm <= tol {
        Ok(x)
    } else {
        Err(ctx.fail(used, norm))
    }
}
