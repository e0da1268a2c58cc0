//! Independent oracles shared by the integration tests. Nothing here calls
//! into the schemes or the harness.

#![allow(dead_code)]

use sdeproj::StateVec;

pub fn v(xs: &[f64]) -> StateVec {
    StateVec::from_column_slice(xs)
}

/// Rotation of `x` by angle `theta` (exact flow of `x' = [[0,-1],[1,0]] x`).
pub fn rotate(x: &StateVec, theta: f64) -> StateVec {
    let (s, c) = theta.sin_cos();
    v(&[c * x[0] - s * x[1], s * x[0] + c * x[1]])
}

/// Cayley map `(I − θ/2·J)⁻¹ (I + θ/2·J) x` for the rotation generator `J`,
/// written out by hand.
pub fn cayley(x: &StateVec, theta: f64) -> StateVec {
    let b = theta / 2.0;
    let det = 1.0 + b * b;
    // (I + bJ) x
    let y0 = x[0] - b * x[1];
    let y1 = x[1] + b * x[0];
    // (I − bJ)⁻¹ = [[1, -b], [b, 1]] / det
    v(&[(y0 - b * y1) / det, (b * y0 + y1) / det])
}

/// Classical fourth-order Runge–Kutta for `x' = f(x)` over `[0, s]`.
pub fn rk4<F: Fn(&StateVec) -> StateVec>(f: F, x0: &StateVec, s: f64, steps: usize) -> StateVec {
    let dt = s / steps as f64;
    let mut x = x0.clone();
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (dt / 2.0)));
        let k3 = f(&(&x + &k2 * (dt / 2.0)));
        let k4 = f(&(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    x
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Small deterministic generator (SplitMix64) for test inputs, independent of
/// the crate's noise streams.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }
}
