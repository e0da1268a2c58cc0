//! Structural checks on models: orthogonality of invariant gradients to the
//! vector fields, the default skew-gradient construction, and
//! finite-difference oracles for analytic derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, Matrix, StateVec};
use crate::model::{SdeModel, SkewGradientForm};

/// Guard added to the denominator of relative orthogonality residuals.
pub const RESIDUAL_GUARD: f64 = 1e-300;

/// States with a declared invariant gradient shorter than this are skipped
/// when sampling.
pub const MIN_GRADIENT_NORM: f64 = 0.1;

/// Threshold below which the default skew-gradient formula is degenerate.
pub const DEGENERATE_GRADIENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantResidual {
    pub label: String,
    /// max |∇I·f| / (|∇I||f| + δ)
    pub drift: f64,
    /// Same residual for each diffusion field.
    pub diffusion: Vec<f64>,
}

impl InvariantResidual {
    pub fn max(&self) -> f64 {
        self.diffusion.iter().fold(self.drift, |m, &v| m.max(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport {
    pub samples: usize,
    pub invariants: Vec<InvariantResidual>,
}

impl ConservationReport {
    pub fn max_residual(&self) -> f64 {
        self.invariants.iter().fold(0.0, |m, r| m.max(r.max()))
    }
}

/// Draws `count` states uniformly from the model's sampling box, rejecting
/// states where any invariant gradient is shorter than [`MIN_GRADIENT_NORM`].
pub fn sample_states(model: &dyn SdeModel, count: usize, seed: u64) -> Result<Vec<StateVec>> {
    let bx = model.sampling_box();
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let mut u = vec![0.0; d];
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(Error::Config(format!(
                "sampling box of {} yields too few non-degenerate states",
                model.name()
            )));
        }
        u.iter_mut().for_each(|v| *v = rng.random::<f64>());
        let x = bx.map_unit(&u);
        let ok = model
            .invariants()
            .iter()
            .all(|inv| inv.gradient(&x).norm() >= MIN_GRADIENT_NORM);
        if ok {
            out.push(x);
        }
    }
    Ok(out)
}

fn relative_orthogonality(grad: &StateVec, field: &StateVec) -> f64 {
    grad.dot(field).abs() / (grad.norm() * field.norm() + RESIDUAL_GUARD)
}

/// Maximum relative orthogonality residual of every invariant gradient
/// against the drift and each diffusion field, over sampled states.
pub fn check_conserved(model: &dyn SdeModel, samples: usize, seed: u64) -> Result<ConservationReport> {
    if samples == 0 {
        return Err(Error::Config("check_conserved needs at least one sample".into()));
    }
    let states = sample_states(model, samples, seed)?;
    let m = model.noise_count();
    let mut rows: Vec<InvariantResidual> = model
        .invariants()
        .iter()
        .map(|inv| InvariantResidual {
            label: inv.label().to_string(),
            drift: 0.0,
            diffusion: vec![0.0; m],
        })
        .collect();

    for x in &states {
        let f = model.drift(x);
        if !all_finite(&f) {
            return Err(Error::Evaluation { what: "drift".into(), state: x.iter().copied().collect() });
        }
        let gs: Vec<StateVec> = (0..m).map(|r| model.diffusion(r, x)).collect();
        if gs.iter().any(|g| !all_finite(g)) {
            return Err(Error::Evaluation { what: "diffusion".into(), state: x.iter().copied().collect() });
        }
        for (row, inv) in rows.iter_mut().zip(model.invariants()) {
            let grad = inv.gradient(x);
            if !all_finite(&grad) {
                return Err(Error::Evaluation {
                    what: format!("gradient of {}", inv.label()),
                    state: x.iter().copied().collect(),
                });
            }
            row.drift = row.drift.max(relative_orthogonality(&grad, &f));
            for (slot, g) in row.diffusion.iter_mut().zip(&gs) {
                *slot = slot.max(relative_orthogonality(&grad, g));
            }
        }
    }
    Ok(ConservationReport { samples, invariants: rows })
}

/// `(v ∇Iᵀ − ∇I vᵀ) / |∇I|²`
fn skew_from(field: &StateVec, grad: &StateVec, norm2: f64) -> Matrix {
    (field * grad.transpose() - grad * field.transpose()) / norm2
}

/// Default skew-gradient matrices `(S, [T_1..T_m])` at `x`, relative to the
/// first declared invariant.
pub fn default_skew_gradient(model: &dyn SdeModel, x: &StateVec) -> Result<(Matrix, Vec<Matrix>)> {
    let inv = model
        .invariants()
        .first()
        .ok_or_else(|| Error::Config(format!("{} declares no invariant", model.name())))?;
    let grad = inv.gradient(x);
    let norm = grad.norm();
    if !(norm >= DEGENERATE_GRADIENT) {
        return Err(Error::DegenerateGradient { norm, state: x.iter().copied().collect() });
    }
    let norm2 = norm * norm;
    let s = skew_from(&model.drift(x), &grad, norm2);
    let ts = (0..model.noise_count())
        .map(|r| skew_from(&model.diffusion(r, x), &grad, norm2))
        .collect();
    Ok((s, ts))
}

/// Skew-gradient form evaluated through [`default_skew_gradient`]. Falls back
/// to zero matrices where the gradient degenerates.
pub struct DefaultSkewGradient<'a>(pub &'a dyn SdeModel);

impl SkewGradientForm for DefaultSkewGradient<'_> {
    fn s(&self, x: &StateVec) -> Matrix {
        default_skew_gradient(self.0, x)
            .map(|(s, _)| s)
            .unwrap_or_else(|_| Matrix::zeros(self.0.dim(), self.0.dim()))
    }
    fn t(&self, r: usize, x: &StateVec) -> Matrix {
        default_skew_gradient(self.0, x)
            .map(|(_, mut ts)| ts.swap_remove(r))
            .unwrap_or_else(|_| Matrix::zeros(self.0.dim(), self.0.dim()))
    }
}

/// ‖M + Mᵀ‖_F
pub fn skew_defect(m: &Matrix) -> f64 {
    (m + m.transpose()).norm()
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_gradient<F>(value: F, x: &StateVec, eps: f64) -> StateVec
where
    F: Fn(&StateVec) -> f64,
{
    let mut g = StateVec::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + eps;
        let up = value(&xp);
        xp[i] = xi - eps;
        let dn = value(&xp);
        xp[i] = xi;
        g[i] = (up - dn) / (2.0 * eps);
    }
    g
}

/// Central-difference Jacobian of a vector field (columns are ∂F/∂x_j).
pub fn finite_diff_jacobian<F>(field: F, x: &StateVec, eps: f64) -> Matrix
where
    F: Fn(&StateVec) -> StateVec,
{
    let n = x.len();
    let mut jac = Matrix::zeros(field(x).len(), n);
    let mut xp = x.clone();
    for j in 0..n {
        let xj = x[j];
        xp[j] = xj + eps;
        let up = field(&xp);
        xp[j] = xj - eps;
        let dn = field(&xp);
        xp[j] = xj;
        jac.set_column(j, &((up - dn) / (2.0 * eps)));
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_square_norm_gradient() {
        let x = StateVec::from_vec(vec![3.0, 4.0]);
        let g = finite_diff_gradient(|v| 0.5 * v.norm_squared(), &x, 1e-5);
        assert!((g - &x).amax() < 1e-6);
    }

    #[test]
    fn pendulum_energy_gradient() {
        let x = StateVec::from_vec(vec![0.1, 1.0]);
        let g = finite_diff_gradient(|v| 0.5 * v[0] * v[0] - v[1].cos(), &x, 1e-5);
        assert!((g[0] - 0.1).abs() < 1e-6);
        assert!((g[1] - 1.0_f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn triple_product_gradient() {
        let x = StateVec::from_vec(vec![1.0, 2.0, 1.0]);
        let g = finite_diff_gradient(|v| v[0] * v[1] * v[2], &x, 1e-5);
        assert!((g - StateVec::from_vec(vec![2.0, 1.0, 2.0])).amax() < 1e-6);
    }

    #[test]
    fn skew_defect_of_rotation_generator() {
        let j = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert_eq!(skew_defect(&j), 0.0);
        assert!(skew_defect(&Matrix::identity(2, 2)) > 1.0);
    }
}
