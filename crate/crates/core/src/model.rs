//! Abstractions for autonomous Stratonovich SDEs
//! `dX = f(X) dt + Σ_r g_r(X) ∘ dW_r` together with their conserved
//! quantities.
//!
//! Evaluators take `&self` and must be pure: models are shared across
//! worker threads during Monte-Carlo studies.

use crate::linalg::{Matrix, StateVec};

/// A scalar conserved quantity `I(x)`.
pub trait Invariant: Send + Sync {
    fn label(&self) -> &str;
    fn value(&self, x: &StateVec) -> f64;
    fn gradient(&self, x: &StateVec) -> StateVec;
    fn hessian(&self, _x: &StateVec) -> Option<Matrix> {
        None
    }
}

/// Invariant built from plain function pointers.
#[derive(Clone)]
pub struct FnInvariant {
    pub label: &'static str,
    pub value: fn(&StateVec) -> f64,
    pub gradient: fn(&StateVec) -> StateVec,
    pub hessian: Option<fn(&StateVec) -> Matrix>,
}

impl Invariant for FnInvariant {
    fn label(&self) -> &str {
        self.label
    }
    fn value(&self, x: &StateVec) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &StateVec) -> StateVec {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &StateVec) -> Option<Matrix> {
        self.hessian.map(|h| h(x))
    }
}

/// Data for the class `dX = f(X)(dt + Σ_r c_r ∘ dW_r)`, whose solution is
/// the deterministic flow `φ` of `f` run for pseudo-time `t + Σ_r c_r W_r(t)`.
pub trait SpecialClass: Send + Sync {
    /// Noise intensities `c_r`, one per Wiener channel.
    fn intensities(&self) -> &[f64];

    /// Taylor coefficients `v_k = φ^{(k)}(0) / k!` of the flow `φ' = f(φ)`,
    /// `φ(0) = x`, for `k = 1..=order`. Implementations support `order <= 4`.
    fn taylor_coeffs(&self, x: &StateVec, order: usize) -> Vec<StateVec>;
}

/// Skew-symmetric `S(x)`, `T_r(x)` with `S ∇I = f` and `T_r ∇I = g_r` for
/// the first declared invariant.
pub trait SkewGradientForm: Send + Sync {
    fn s(&self, x: &StateVec) -> Matrix;
    fn t(&self, r: usize, x: &StateVec) -> Matrix;
}

/// Axis-aligned box from which property tests draw states.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SamplingBox {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        SamplingBox {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    /// Maps a point of the unit cube into the box.
    pub fn map_unit(&self, u: &[f64]) -> StateVec {
        StateVec::from_iterator(
            self.lower.len(),
            self.lower
                .iter()
                .zip(&self.upper)
                .zip(u)
                .map(|((lo, hi), t)| lo + (hi - lo) * t),
        )
    }
}

pub trait SdeModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn noise_count(&self) -> usize;

    fn drift(&self, x: &StateVec) -> StateVec;
    fn diffusion(&self, r: usize, x: &StateVec) -> StateVec;

    /// Jacobian `g_r'(x)` of the r-th diffusion field, if known analytically.
    fn diffusion_jacobian(&self, _r: usize, _x: &StateVec) -> Option<Matrix> {
        None
    }

    /// Declared conserved quantities; at least one.
    fn invariants(&self) -> &[Box<dyn Invariant>];

    fn special_class(&self) -> Option<&dyn SpecialClass> {
        None
    }

    fn skew_gradient_form(&self) -> Option<&dyn SkewGradientForm> {
        None
    }

    /// Whether `Λ_i g_r = Λ_r g_i` holds for all channel pairs.
    fn commutative_noise(&self) -> bool {
        self.noise_count() <= 1
    }

    fn sampling_box(&self) -> SamplingBox;
}

/// Values of every declared invariant at `x`.
pub fn invariant_values(model: &dyn SdeModel, x: &StateVec) -> Vec<f64> {
    model.invariants().iter().map(|inv| inv.value(x)).collect()
}

/// `Λ_i g_r(x) = g_r'(x) g_i(x)`, from analytic Jacobians when the model has
/// them and otherwise from the special-class identity `c_i c_r f'(x) f(x)`.
pub fn lambda_op(model: &dyn SdeModel, i: usize, r: usize, x: &StateVec) -> Option<StateVec> {
    if let Some(jac) = model.diffusion_jacobian(r, x) {
        return Some(jac * model.diffusion(i, x));
    }
    let sc = model.special_class()?;
    let c = sc.intensities();
    // v_2 = f'f / 2
    let v = sc.taylor_coeffs(x, 2);
    Some(&v[1] * (2.0 * c[i] * c[r]))
}
