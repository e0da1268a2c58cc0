//! Projection of a supporting step back onto the invariant manifold
//! `{x : Iⁱ(x) = Iⁱ(x₀)}`.
//!
//! After the supporting scheme produces `X̂`, the projected state is
//! `X̄ = X̂ + Φλ` where the columns of `Φ` are invariant gradients (at `X̂` by
//! default, or at the pre-step state) and `λ ∈ ℝˡ` solves
//! `𝐈(X̂ + Φλ) = targets` by Newton's method started from `λ = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_dense, Matrix, StateVec};
use crate::model::{invariant_values, Invariant, SdeModel};
use crate::schemes::{self, SchemeConfig, StepInput};

/// Projection directions shorter than this are rejected.
pub const MIN_DIRECTION_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `Φ = ∇I(X̂)`
    GradAtXhat,
    /// `Φ = ∇I(x)` at the pre-step state.
    GradAtX,
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xhat" => Ok(Direction::GradAtXhat),
            "x" => Ok(Direction::GradAtX),
            other => Err(Error::Config(format!("unknown projection direction '{other}' (xhat|x)"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::GradAtXhat => "xhat",
            Direction::GradAtX => "x",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub direction: Direction,
    /// Tolerance on `max_i |Iⁱ(X̄) − targetⁱ|`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { direction: Direction::GradAtXhat, newton_tol: 1e-12, newton_max_iter: 25 }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::Config("newton_tol must be positive".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::Config("newton_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    pub state: StateVec,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn direction_base<'a>(cfg: &ProjectionConfig, x_prev: &'a StateVec, x_hat: &'a StateVec) -> &'a StateVec {
    match cfg.direction {
        Direction::GradAtXhat => x_hat,
        Direction::GradAtX => x_prev,
    }
}

fn nonconvergence(iterations: usize, residual: f64, x_prev: &StateVec, x_hat: &StateVec) -> Error {
    let mut state: Vec<f64> = x_prev.iter().copied().collect();
    state.extend(x_hat.iter());
    Error::Nonconvergence { solver: "projection newton (state = [x_prev, x_hat])", iterations, residual, t: f64::NAN, h: f64::NAN, state }
}

/// Scalar Newton projection onto `{I = target}` for a single invariant.
pub fn project_single(
    inv: &dyn Invariant,
    x_prev: &StateVec,
    x_hat: &StateVec,
    target: f64,
    cfg: &ProjectionConfig,
) -> Result<ProjectionOutcome> {
    let base = direction_base(cfg, x_prev, x_hat);
    let phi = inv.gradient(base);
    let norm = phi.norm();
    if !(norm >= MIN_DIRECTION_NORM) {
        return Err(Error::DegenerateGradient { norm, state: base.iter().copied().collect() });
    }

    let mut lambda = 0.0;
    let mut x = x_hat.clone();
    let mut iterations = 0;
    loop {
        let residual = inv.value(&x) - target;
        if residual.abs() <= cfg.newton_tol {
            return Ok(ProjectionOutcome { state: x, lambda: vec![lambda], iterations, residual: residual.abs() });
        }
        if iterations == cfg.newton_max_iter || !residual.is_finite() {
            return Err(nonconvergence(iterations, residual.abs(), x_prev, x_hat));
        }
        let slope = inv.gradient(&x).dot(&phi);
        if !(slope.abs() > 0.0) || !slope.is_finite() {
            return Err(Error::DegenerateGradient { norm: slope.abs(), state: x.iter().copied().collect() });
        }
        lambda += -residual / slope;
        x = x_hat + &phi * lambda;
        iterations += 1;
    }
}

/// Full Newton projection onto `{𝐈 = targets}` with `Φ = 𝐈'(·)ᵀ`.
pub fn project_multi(
    invariants: &[Box<dyn Invariant>],
    x_prev: &StateVec,
    x_hat: &StateVec,
    targets: &[f64],
    cfg: &ProjectionConfig,
) -> Result<ProjectionOutcome> {
    let l = invariants.len();
    let d = x_hat.len();
    if l != targets.len() || l == 0 {
        return Err(Error::Config(format!("{l} invariants but {} targets", targets.len())));
    }
    if l > d {
        return Err(Error::RankDeficient(format!("{l} invariants in dimension {d}")));
    }
    let base = direction_base(cfg, x_prev, x_hat);
    let phi: Vec<StateVec> = invariants.iter().map(|inv| inv.gradient(base)).collect();
    for col in &phi {
        let norm = col.norm();
        if !(norm >= MIN_DIRECTION_NORM) {
            return Err(Error::DegenerateGradient { norm, state: base.iter().copied().collect() });
        }
    }

    let mut lambda = StateVec::zeros(l);
    let mut x = x_hat.clone();
    let mut iterations = 0;
    loop {
        let f = StateVec::from_iterator(l, invariants.iter().zip(targets).map(|(inv, t)| inv.value(&x) - t));
        let residual = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if residual <= cfg.newton_tol {
            return Ok(ProjectionOutcome {
                state: x,
                lambda: lambda.iter().copied().collect(),
                iterations,
                residual,
            });
        }
        if iterations == cfg.newton_max_iter || !residual.is_finite() {
            return Err(nonconvergence(iterations, residual, x_prev, x_hat));
        }
        let grads: Vec<StateVec> = invariants.iter().map(|inv| inv.gradient(&x)).collect();
        let jac = Matrix::from_fn(l, l, |i, k| grads[i].dot(&phi[k]));
        let step = solve_dense(&jac, &(-f)).map_err(|e| match e {
            Error::SingularMatrix { pivot, threshold } => Error::RankDeficient(format!(
                "projection Jacobian pivot {pivot:e} below {threshold:e} at {:?}",
                x.as_slice()
            )),
            other => other,
        })?;
        lambda += step;
        let mut shift = StateVec::zeros(d);
        for (col, lam) in phi.iter().zip(lambda.iter()) {
            shift += col * *lam;
        }
        x = x_hat + shift;
        iterations += 1;
    }
}

/// Projection onto the manifold of a path's initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub cfg: ProjectionConfig,
    pub targets: Vec<f64>,
}

impl Projector {
    pub fn new(model: &dyn SdeModel, x0: &StateVec, cfg: ProjectionConfig) -> Result<Self> {
        cfg.validate()?;
        if model.invariants().is_empty() {
            return Err(Error::Config(format!("{} declares no invariant", model.name())));
        }
        Ok(Projector { cfg, targets: invariant_values(model, x0) })
    }

    pub fn project(&self, model: &dyn SdeModel, x_prev: &StateVec, x_hat: &StateVec) -> Result<ProjectionOutcome> {
        let invs = model.invariants();
        if invs.len() == 1 {
            project_single(invs[0].as_ref(), x_prev, x_hat, self.targets[0], &self.cfg)
        } else {
            project_multi(invs, x_prev, x_hat, &self.targets, &self.cfg)
        }
    }
}

/// Supporting step followed by projection onto the path's initial manifold.
pub fn projected_step(
    model: &dyn SdeModel,
    input: &StepInput<'_>,
    scheme_cfg: &SchemeConfig,
    projector: &Projector,
) -> Result<ProjectionOutcome> {
    let x_hat = schemes::step(model, input, scheme_cfg)?;
    projector.project(model, input.x, &x_hat).map_err(|e| match e {
        Error::Nonconvergence { solver, iterations, residual, state, .. } => {
            Error::Nonconvergence { solver, iterations, residual, t: input.t, h: input.h, state }
        }
        other => other,
    })
}
