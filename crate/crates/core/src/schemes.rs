//! Supporting one-step methods for Stratonovich SDEs.
//!
//! Each scheme receives its own-step Wiener increments untruncated and clamps
//! them with the configured [`TruncationConfig`] before use.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::implicit::{solve_fixed_point, ImplicitOptions, SolveContext};
use crate::linalg::{Matrix, StateVec};
use crate::model::{lambda_op, Invariant, SdeModel};
use crate::noise::{truncate_increment, TruncationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    Euler,
    Milstein,
    Midpoint,
    T32,
    T2,
    DiscreteGradient,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Euler,
        Scheme::Milstein,
        Scheme::Midpoint,
        Scheme::T32,
        Scheme::T2,
        Scheme::DiscreteGradient,
    ];

    /// Display label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Euler => "Euler",
            Scheme::Milstein => "Milstein",
            Scheme::Midpoint => "Mid",
            Scheme::T32 => "T3/2",
            Scheme::T2 => "T2",
            Scheme::DiscreteGradient => "DG",
        }
    }

    /// Nominal mean-square order.
    pub fn order(self) -> f64 {
        match self {
            Scheme::Euler => 0.5,
            Scheme::Milstein | Scheme::Midpoint | Scheme::DiscreteGradient => 1.0,
            Scheme::T32 => 1.5,
            Scheme::T2 => 2.0,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Scheme::Euler),
            "milstein" => Ok(Scheme::Milstein),
            "mid" | "midpoint" => Ok(Scheme::Midpoint),
            "t32" | "t3/2" => Ok(Scheme::T32),
            "t2" => Ok(Scheme::T2),
            "dg" => Ok(Scheme::DiscreteGradient),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected euler, milstein, mid, t32, t2 or dg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub method: Scheme,
    pub implicit_tol: f64,
    pub implicit_max_iter: usize,
    pub truncation: TruncationConfig,
}

impl SchemeConfig {
    pub fn new(method: Scheme) -> Self {
        SchemeConfig {
            method,
            implicit_tol: 1e-14,
            implicit_max_iter: 50,
            truncation: TruncationConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.implicit_tol > 0.0) {
            return Err(Error::Config("implicit_tol must be positive".into()));
        }
        if self.implicit_max_iter == 0 {
            return Err(Error::Config("implicit_max_iter must be at least 1".into()));
        }
        if self.truncation.enabled && self.truncation.k == 0 {
            return Err(Error::Config("truncation k must be positive".into()));
        }
        // Untruncated Gaussian increments make the implicit midpoint equation
        // unsolvable with positive probability.
        if self.method == Scheme::Midpoint && !self.truncation.enabled {
            return Err(Error::Config("the midpoint scheme requires truncated increments".into()));
        }
        Ok(())
    }

    fn implicit(&self) -> ImplicitOptions {
        ImplicitOptions { tol: self.implicit_tol, max_iter: self.implicit_max_iter }
    }
}

/// One step from `x` at time `t` with step `h` and raw increments `dw`.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub t: f64,
    pub x: &'a StateVec,
    pub h: f64,
    pub dw: &'a [f64],
}

fn truncated(input: &StepInput<'_>, model: &dyn SdeModel, cfg: &SchemeConfig) -> Result<Vec<f64>> {
    if input.dw.len() != model.noise_count() {
        return Err(Error::Config(format!(
            "{} expects {} increments per step, got {}",
            model.name(),
            model.noise_count(),
            input.dw.len()
        )));
    }
    input
        .dw
        .iter()
        .map(|&w| truncate_increment(w, input.h, &cfg.truncation))
        .collect()
}

/// Dispatches on `cfg.method`.
pub fn step(model: &dyn SdeModel, input: &StepInput<'_>, cfg: &SchemeConfig) -> Result<StateVec> {
    match cfg.method {
        Scheme::Euler => euler_step(model, input, cfg),
        Scheme::Milstein => milstein_step(model, input, cfg),
        Scheme::Midpoint => midpoint_step(model, input, cfg),
        Scheme::T32 => taylor_step(model, input, TaylorOrder::T32, cfg),
        Scheme::T2 => taylor_step(model, input, TaylorOrder::T2, cfg),
        Scheme::DiscreteGradient => discrete_gradient_step(model, input, cfg),
    }
}

/// Checks that `model` carries the data `method` needs.
pub fn check_support(model: &dyn SdeModel, method: Scheme) -> Result<()> {
    let probe = model.sampling_box().map_unit(&vec![0.5; model.dim()]);
    let unsupported = |what: &str| Err(Error::UnsupportedModel(format!("{} {what}", model.name())));
    match method {
        Scheme::Euler => {
            if (0..model.noise_count()).any(|r| lambda_op(model, r, r, &probe).is_none()) {
                return unsupported("lacks diffusion Jacobians for the Ito correction");
            }
        }
        Scheme::Milstein => {
            if !model.commutative_noise() {
                return unsupported("is not flagged as having commutative noise");
            }
            if (0..model.noise_count()).any(|r| lambda_op(model, r, r, &probe).is_none()) {
                return unsupported("lacks diffusion Jacobians");
            }
        }
        Scheme::Midpoint => {}
        Scheme::T32 | Scheme::T2 => {
            if model.special_class().is_none() {
                return unsupported("is not in the f(X)(dt + Σ c_r ∘ dW_r) class");
            }
        }
        Scheme::DiscreteGradient => {
            if model.skew_gradient_form().is_none() {
                return unsupported("has no skew-gradient form");
            }
        }
    }
    Ok(())
}

/// Euler–Maruyama on the Itô form: `x + h(f + ½ Σ g_r' g_r) + Σ g_r ζ_r`.
pub fn euler_step(model: &dyn SdeModel, input: &StepInput<'_>, cfg: &SchemeConfig) -> Result<StateVec> {
    let zeta = truncated(input, model, cfg)?;
    let x = input.x;
    let mut drift = model.drift(x);
    for r in 0..model.noise_count() {
        let gg = lambda_op(model, r, r, x).ok_or_else(|| {
            Error::Config(format!("{}: Euler needs g_r' g_r (diffusion Jacobian or special class)", model.name()))
        })?;
        drift += gg * 0.5;
    }
    let mut out = x + drift * input.h;
    for (r, z) in zeta.iter().enumerate() {
        out += model.diffusion(r, x) * *z;
    }
    Ok(out)
}

/// Milstein for commutative noise:
/// `x + hf + Σ g_r ζ_r + Σ_{i<r} Λ_i g_r ζ_i ζ_r + ½ Σ Λ_r g_r ζ_r²`.
pub fn milstein_step(model: &dyn SdeModel, input: &StepInput<'_>, cfg: &SchemeConfig) -> Result<StateVec> {
    if !model.commutative_noise() {
        return Err(Error::UnsupportedModel(format!(
            "{} is not flagged as having commutative noise",
            model.name()
        )));
    }
    let zeta = truncated(input, model, cfg)?;
    let x = input.x;
    let m = model.noise_count();
    let missing = || Error::Config(format!("{}: Milstein needs Λ_i g_r", model.name()));
    let mut out = x + model.drift(x) * input.h;
    for r in 0..m {
        out += model.diffusion(r, x) * zeta[r];
        out += lambda_op(model, r, r, x).ok_or_else(missing)? * (0.5 * zeta[r] * zeta[r]);
        for i in 0..r {
            out += lambda_op(model, i, r, x).ok_or_else(missing)? * (zeta[i] * zeta[r]);
        }
    }
    Ok(out)
}

/// Implicit midpoint: `X = x + h f((x+X)/2) + Σ g_r((x+X)/2) ζ_r`.
pub fn midpoint_step(model: &dyn SdeModel, input: &StepInput<'_>, cfg: &SchemeConfig) -> Result<StateVec> {
    cfg.validate()?;
    let zeta = truncated(input, model, cfg)?;
    let x = input.x;
    let h = input.h;
    let field = |y: &StateVec| {
        let mut v = model.drift(y) * h;
        for (r, z) in zeta.iter().enumerate() {
            v += model.diffusion(r, y) * *z;
        }
        v
    };
    let guess = x + field(x);
    let g = |y: &StateVec| {
        let mid = (x + y) * 0.5;
        x + field(&mid)
    };
    solve_fixed_point(g, guess, cfg.implicit(), SolveContext { solver: "midpoint", t: input.t, h, x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaylorOrder {
    T32,
    T2,
}

/// Multi-indices `(i, j)` (`i` time indices, `j` noise indices) kept by the
/// Itô–Taylor hierarchical set of each order: `2i + j ≤ 2γ`, plus `(2, 0)`
/// for γ = 3/2.
const T32_TERMS: [(u32, u32); 6] = [(1, 0), (0, 1), (0, 2), (1, 1), (0, 3), (2, 0)];
const T2_TERMS: [(u32, u32); 8] = [(1, 0), (0, 1), (0, 2), (1, 1), (0, 3), (2, 0), (0, 4), (1, 2)];

/// Weights `w_k` such that the Taylor step is `x + Σ_{k=1}^{4} w_k v_k`.
///
/// For `dX = f(X)(dt + Σ c_r ∘ dW_r)` the Itô generators are `L⁰ = D + ½c₂D²`
/// and `Lʳ = c_r D`, with `D = f·∇` and `c₂ = Σ c_r²`. They commute, so the
/// sum of all multiple Itô integrals with `i` time and `j` noise indices
/// collapses to `hⁱ/i! · He_j(u; c₂h)/j!` (`He_j` the Hermite polynomial
/// with variance `c₂h`, `u = Σ c_r ζ_r`). No double integral `ΔZ` has to be
/// simulated. Since `Dᵏ x = k! v_k`, each kept term contributes its
/// polynomial in `D` directly to the `v_k` weights.
pub fn taylor_weights(order: TaylorOrder, h: f64, u: f64, c2: f64) -> [f64; 4] {
    let s = c2 * h;
    let hermite = [1.0, u, u * u - s, u * u * u - 3.0 * s * u, u.powi(4) - 6.0 * s * u * u + 3.0 * s * s];
    let terms: &[(u32, u32)] = match order {
        TaylorOrder::T32 => &T32_TERMS,
        TaylorOrder::T2 => &T2_TERMS,
    };
    const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];
    let mut w = [0.0; 4];
    for &(i, j) in terms {
        // (D + ½c₂D²)^i · D^j as coefficients of D⁰..D⁴.
        let mut poly = [0.0; 5];
        poly[j as usize] = 1.0;
        for _ in 0..i {
            let mut next = [0.0; 5];
            for k in 0..5 {
                if k + 1 < 5 {
                    next[k + 1] += poly[k];
                }
                if k + 2 < 5 {
                    next[k + 2] += 0.5 * c2 * poly[k];
                }
            }
            poly = next;
        }
        let scale = h.powi(i as i32) / FACT[i as usize] * hermite[j as usize] / FACT[j as usize];
        for k in 1..5 {
            w[k - 1] += poly[k] * FACT[k] * scale;
        }
    }
    w
}

/// Strong Itô–Taylor step of order 3/2 or 2 for the special class
/// `dX = f(X)(dt + Σ c_r ∘ dW_r)`, written in the pseudo-time coefficients
/// `v_k` (see [`taylor_weights`]).
///
/// With `Δs = h + u` the weights reduce to
///
/// ```text
/// T3/2:  x + v_1 Δs + v_2 Δs² + v_3 (u³ + 3c₂h²) + 3c₂²h² v_4
/// T2:    x + v_1 Δs + v_2 Δs² + v_3 (u³ + 3hu²)  + v_4 u⁴
/// ```
///
/// Plain truncation of the pseudo-time series `Σ v_k Δsᵏ` at `k = 3` would
/// only be order 1: the dropped `v_4 Δs⁴` has mean `3c₂²h²`, a local bias
/// that accumulates to a global `O(h)`. At `k = 4` the truncated series is
/// order 2 as well, but it keeps mean-zero terms the Itô–Taylor scheme drops
/// and therefore has a different (smaller) error constant. With `h = 0` both
/// agree with the pseudo-time series exactly.
pub fn taylor_step(
    model: &dyn SdeModel,
    input: &StepInput<'_>,
    order: TaylorOrder,
    cfg: &SchemeConfig,
) -> Result<StateVec> {
    let sc = model.special_class().ok_or_else(|| {
        Error::UnsupportedModel(format!("{} has no special-class data for Taylor schemes", model.name()))
    })?;
    let zeta = truncated(input, model, cfg)?;
    let c = sc.intensities();
    let u: f64 = c.iter().zip(&zeta).map(|(ci, z)| ci * z).sum();
    let c2: f64 = c.iter().map(|ci| ci * ci).sum();
    let v = sc.taylor_coeffs(input.x, 4);

    let mut out = input.x.clone();
    for (vk, wk) in v.iter().zip(taylor_weights(order, input.h, u, c2)) {
        out += vk * wk;
    }
    Ok(out)
}

/// Below this separation the discrete gradient falls back to `∇I(x)`.
pub const DISCRETE_GRADIENT_MIN_SEP: f64 = 1e-10;

/// Gonzalez midpoint discrete gradient
/// `∇I(μ) + [(I(y) − I(x) − ∇I(μ)·(y−x)) / |y−x|²] (y−x)`, `μ = (x+y)/2`.
///
/// Satisfies `∇̄I(x,y)·(y−x) = I(y) − I(x)`.
pub fn discrete_gradient(inv: &dyn Invariant, x: &StateVec, y: &StateVec) -> StateVec {
    let dx = y - x;
    let n2 = dx.norm_squared();
    if n2.sqrt() < DISCRETE_GRADIENT_MIN_SEP {
        return inv.gradient(x);
    }
    let mu = (x + y) * 0.5;
    let gm = inv.gradient(&mu);
    let coef = (inv.value(y) - inv.value(x) - gm.dot(&dx)) / n2;
    gm + dx * coef
}

/// Discrete-gradient step in skew-gradient form:
/// `X = x + (h S(x) + Σ ζ_r T_r(x)) ∇̄I(x, X)` for the first declared
/// invariant, which it conserves up to solver tolerance.
pub fn discrete_gradient_step(model: &dyn SdeModel, input: &StepInput<'_>, cfg: &SchemeConfig) -> Result<StateVec> {
    cfg.validate()?;
    let sg = model.skew_gradient_form().ok_or_else(|| {
        Error::UnsupportedModel(format!("{} has no skew-gradient form", model.name()))
    })?;
    let inv = model
        .invariants()
        .first()
        .ok_or_else(|| Error::Config(format!("{} declares no invariant", model.name())))?;
    let zeta = truncated(input, model, cfg)?;
    let x = input.x;
    let mut op: Matrix = sg.s(x) * input.h;
    for (r, z) in zeta.iter().enumerate() {
        op += sg.t(r, x) * *z;
    }
    let g = |y: &StateVec| x + &op * discrete_gradient(inv.as_ref(), x, y);
    let guess = x + &op * inv.gradient(x);
    solve_fixed_point(
        g,
        guess,
        cfg.implicit(),
        SolveContext { solver: "discrete gradient", t: input.t, h: input.h, x },
    )
}
