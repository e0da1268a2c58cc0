//! Bundled benchmark systems, all of the form `dX = f(X)(dt + Σ c_r ∘ dW_r)`:
//! the Kubo oscillator, a stochastically forced pendulum and the cyclic
//! Lotka–Volterra system.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, StateVec};
use crate::model::{FnInvariant, Invariant, SamplingBox, SdeModel, SkewGradientForm, SpecialClass};
use crate::verify::default_skew_gradient;

fn vec2(a: f64, b: f64) -> StateVec {
    StateVec::from_vec(vec![a, b])
}

fn vec3(a: f64, b: f64, c: f64) -> StateVec {
    StateVec::from_vec(vec![a, b, c])
}

fn half_norm2(x: &StateVec) -> f64 {
    0.5 * x.norm_squared()
}

fn identity_gradient(x: &StateVec) -> StateVec {
    x.clone()
}

fn identity_hessian(x: &StateVec) -> Matrix {
    Matrix::identity(x.len(), x.len())
}

// ---------------------------------------------------------------------------
// Kubo oscillator

/// `dX₁ = −a X₂ dt − σ X₂ ∘ dW`, `dX₂ = a X₁ dt + σ X₁ ∘ dW`, conserving
/// `I = ½(x² + y²)`.
pub struct KuboModel {
    pub a: f64,
    pub sigma: f64,
    c: [f64; 1],
    invariants: Vec<Box<dyn Invariant>>,
}

impl KuboModel {
    pub fn new(a: f64, sigma: f64) -> Result<Self> {
        if !a.is_finite() || !sigma.is_finite() {
            return Err(Error::Config("kubo parameters must be finite".into()));
        }
        let c = if a != 0.0 { sigma / a } else { 0.0 };
        Ok(KuboModel {
            a,
            sigma,
            c: [c],
            invariants: vec![Box::new(FnInvariant {
                label: "I",
                value: half_norm2,
                gradient: identity_gradient,
                hessian: Some(identity_hessian),
            })],
        })
    }

    fn generator(scale: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[0.0, -scale, scale, 0.0])
    }
}

impl SdeModel for KuboModel {
    fn name(&self) -> &str {
        "kubo"
    }
    fn dim(&self) -> usize {
        2
    }
    fn noise_count(&self) -> usize {
        1
    }
    fn drift(&self, x: &StateVec) -> StateVec {
        vec2(-self.a * x[1], self.a * x[0])
    }
    fn diffusion(&self, _r: usize, x: &StateVec) -> StateVec {
        vec2(-self.sigma * x[1], self.sigma * x[0])
    }
    fn diffusion_jacobian(&self, _r: usize, _x: &StateVec) -> Option<Matrix> {
        Some(Self::generator(self.sigma))
    }
    fn invariants(&self) -> &[Box<dyn Invariant>] {
        &self.invariants
    }
    fn special_class(&self) -> Option<&dyn SpecialClass> {
        if self.a != 0.0 {
            Some(self)
        } else {
            None
        }
    }
    fn skew_gradient_form(&self) -> Option<&dyn SkewGradientForm> {
        Some(self)
    }
    fn sampling_box(&self) -> SamplingBox {
        SamplingBox::cube(2, -2.0, 2.0)
    }
}

impl SpecialClass for KuboModel {
    fn intensities(&self) -> &[f64] {
        &self.c
    }

    /// `v_k = A^k x / k!` with `A = [[0, −a], [a, 0]]`.
    fn taylor_coeffs(&self, x: &StateVec, order: usize) -> Vec<StateVec> {
        let mut out = Vec::with_capacity(order);
        let mut cur = x.clone();
        for k in 1..=order {
            cur = vec2(-self.a * cur[1], self.a * cur[0]) / k as f64;
            out.push(cur.clone());
        }
        out
    }
}

impl SkewGradientForm for KuboModel {
    fn s(&self, _x: &StateVec) -> Matrix {
        Self::generator(self.a)
    }
    fn t(&self, _r: usize, _x: &StateVec) -> Matrix {
        Self::generator(self.sigma)
    }
}

/// Exact Kubo solution: `x0` rotated by `a t + σ W(t)`.
pub fn exact_kubo(x0: &StateVec, t: f64, w: f64, a: f64, sigma: f64) -> StateVec {
    let (s, c) = (a * t + sigma * w).sin_cos();
    vec2(c * x0[0] - s * x0[1], s * x0[0] + c * x0[1])
}

// ---------------------------------------------------------------------------
// Pendulum

fn pendulum_energy(x: &StateVec) -> f64 {
    0.5 * x[0] * x[0] - x[1].cos()
}

fn pendulum_energy_gradient(x: &StateVec) -> StateVec {
    vec2(x[0], x[1].sin())
}

fn pendulum_energy_hessian(x: &StateVec) -> Matrix {
    Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[1].cos()])
}

/// `d(p, q) = (−sin q, p)(dt + c₁ ∘ dW₁ + c₂ ∘ dW₂)`, conserving
/// `I = ½p² − cos q`.
pub struct PendulumModel {
    pub c: [f64; 2],
    invariants: Vec<Box<dyn Invariant>>,
}

impl PendulumModel {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !c1.is_finite() || !c2.is_finite() {
            return Err(Error::Config("pendulum intensities must be finite".into()));
        }
        Ok(PendulumModel {
            c: [c1, c2],
            invariants: vec![Box::new(FnInvariant {
                label: "I",
                value: pendulum_energy,
                gradient: pendulum_energy_gradient,
                hessian: Some(pendulum_energy_hessian),
            })],
        })
    }

    fn field(x: &StateVec) -> StateVec {
        vec2(-x[1].sin(), x[0])
    }

    fn field_jacobian(x: &StateVec) -> Matrix {
        Matrix::from_row_slice(2, 2, &[0.0, -x[1].cos(), 1.0, 0.0])
    }
}

impl SdeModel for PendulumModel {
    fn name(&self) -> &str {
        "pendulum"
    }
    fn dim(&self) -> usize {
        2
    }
    fn noise_count(&self) -> usize {
        2
    }
    fn drift(&self, x: &StateVec) -> StateVec {
        Self::field(x)
    }
    fn diffusion(&self, r: usize, x: &StateVec) -> StateVec {
        Self::field(x) * self.c[r]
    }
    fn diffusion_jacobian(&self, r: usize, x: &StateVec) -> Option<Matrix> {
        Some(Self::field_jacobian(x) * self.c[r])
    }
    fn invariants(&self) -> &[Box<dyn Invariant>] {
        &self.invariants
    }
    fn special_class(&self) -> Option<&dyn SpecialClass> {
        Some(self)
    }
    fn skew_gradient_form(&self) -> Option<&dyn SkewGradientForm> {
        Some(self)
    }
    fn commutative_noise(&self) -> bool {
        // g_r = c_r f, so Λ_i g_r = c_i c_r f'f is symmetric in (i, r).
        true
    }
    fn sampling_box(&self) -> SamplingBox {
        SamplingBox::cube(2, -2.0, 2.0)
    }
}

impl SpecialClass for PendulumModel {
    fn intensities(&self) -> &[f64] {
        &self.c
    }

    /// Iterated Lie derivatives of the coordinates along `L = −sin q ∂_p + p ∂_q`:
    ///
    /// ```text
    /// L p  = −sin q                 L q  = p
    /// L²p  = −p cos q               L²q  = −sin q
    /// L³p  = sin q cos q + p² sin q L³q  = −p cos q
    /// L⁴p  = p cos 2q − 2p sin²q + p³ cos q
    /// L⁴q  = sin q cos q + p² sin q
    /// ```
    /// and `v_k = L^k(p, q) / k!`.
    fn taylor_coeffs(&self, x: &StateVec, order: usize) -> Vec<StateVec> {
        let (p, q) = (x[0], x[1]);
        let (s, c) = q.sin_cos();
        let l3p = s * c + p * p * s;
        let all = [
            vec2(-s, p),
            vec2(-p * c, -s) / 2.0,
            vec2(l3p, -p * c) / 6.0,
            vec2(p * (2.0 * q).cos() - 2.0 * p * s * s + p * p * p * c, l3p) / 24.0,
        ];
        all.into_iter().take(order).collect()
    }
}

impl SkewGradientForm for PendulumModel {
    fn s(&self, _x: &StateVec) -> Matrix {
        KuboModel::generator(1.0)
    }
    fn t(&self, r: usize, _x: &StateVec) -> Matrix {
        KuboModel::generator(self.c[r])
    }
}

// ---------------------------------------------------------------------------
// Cyclic Lotka–Volterra

fn lv_sum(x: &StateVec) -> f64 {
    x[0] + x[1] + x[2]
}

fn lv_sum_gradient(_x: &StateVec) -> StateVec {
    vec3(1.0, 1.0, 1.0)
}

fn lv_sum_hessian(_x: &StateVec) -> Matrix {
    Matrix::zeros(3, 3)
}

fn lv_product(x: &StateVec) -> f64 {
    x[0] * x[1] * x[2]
}

fn lv_product_gradient(x: &StateVec) -> StateVec {
    vec3(x[1] * x[2], x[0] * x[2], x[0] * x[1])
}

fn lv_product_hessian(x: &StateVec) -> Matrix {
    Matrix::from_row_slice(3, 3, &[0.0, x[2], x[1], x[2], 0.0, x[0], x[1], x[0], 0.0])
}

/// `d(x, y, z) = (x(z−y), y(x−z), z(y−x))(dt + c ∘ dW)`, conserving
/// `I₁ = x + y + z` and `I₂ = xyz`.
pub struct LotkaVolterraModel {
    pub c: [f64; 1],
    invariants: Vec<Box<dyn Invariant>>,
}

impl LotkaVolterraModel {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::Config("lotka intensity must be finite".into()));
        }
        Ok(LotkaVolterraModel {
            c: [c],
            invariants: vec![
                Box::new(FnInvariant {
                    label: "I1",
                    value: lv_sum,
                    gradient: lv_sum_gradient,
                    hessian: Some(lv_sum_hessian),
                }),
                Box::new(FnInvariant {
                    label: "I2",
                    value: lv_product,
                    gradient: lv_product_gradient,
                    hessian: Some(lv_product_hessian),
                }),
            ],
        })
    }

    fn field(x: &StateVec) -> StateVec {
        vec3(x[0] * (x[2] - x[1]), x[1] * (x[0] - x[2]), x[2] * (x[1] - x[0]))
    }

    fn field_jacobian(x: &StateVec) -> Matrix {
        let (a, b, c) = (x[0], x[1], x[2]);
        Matrix::from_row_slice(3, 3, &[c - b, -a, a, b, a - c, -b, -c, c, b - a])
    }
}

impl SdeModel for LotkaVolterraModel {
    fn name(&self) -> &str {
        "lotka"
    }
    fn dim(&self) -> usize {
        3
    }
    fn noise_count(&self) -> usize {
        1
    }
    fn drift(&self, x: &StateVec) -> StateVec {
        Self::field(x)
    }
    fn diffusion(&self, _r: usize, x: &StateVec) -> StateVec {
        Self::field(x) * self.c[0]
    }
    fn diffusion_jacobian(&self, _r: usize, x: &StateVec) -> Option<Matrix> {
        Some(Self::field_jacobian(x) * self.c[0])
    }
    fn invariants(&self) -> &[Box<dyn Invariant>] {
        &self.invariants
    }
    fn special_class(&self) -> Option<&dyn SpecialClass> {
        Some(self)
    }
    fn skew_gradient_form(&self) -> Option<&dyn SkewGradientForm> {
        Some(self)
    }
    fn sampling_box(&self) -> SamplingBox {
        SamplingBox::cube(3, 0.2, 3.0)
    }
}

impl SpecialClass for LotkaVolterraModel {
    fn intensities(&self) -> &[f64] {
        &self.c
    }

    /// Power-series recursion: with `φ(s) = Σ a_k s^k`, each component of
    /// `φ' = f(φ)` is a product of two series, so
    /// `(k+1) a_{k+1} = Σ_{j≤k} a_j ⊙ (cyclic differences)_{k−j}`.
    fn taylor_coeffs(&self, x: &StateVec, order: usize) -> Vec<StateVec> {
        let mut a: Vec<[f64; 3]> = vec![[x[0], x[1], x[2]]];
        for k in 0..order {
            let mut next = [0.0; 3];
            for j in 0..=k {
                let (u, w) = (a[j], a[k - j]);
                next[0] += u[0] * (w[2] - w[1]);
                next[1] += u[1] * (w[0] - w[2]);
                next[2] += u[2] * (w[1] - w[0]);
            }
            let kk = (k + 1) as f64;
            a.push([next[0] / kk, next[1] / kk, next[2] / kk]);
        }
        a[1..].iter().map(|v| vec3(v[0], v[1], v[2])).collect()
    }
}

impl SkewGradientForm for LotkaVolterraModel {
    // Default formula relative to I₁, whose gradient never vanishes.
    fn s(&self, x: &StateVec) -> Matrix {
        default_skew_gradient(self, x).map(|(s, _)| s).unwrap_or_else(|_| Matrix::zeros(3, 3))
    }
    fn t(&self, r: usize, x: &StateVec) -> Matrix {
        default_skew_gradient(self, x)
            .map(|(_, mut t)| t.swap_remove(r))
            .unwrap_or_else(|_| Matrix::zeros(3, 3))
    }
}

// ---------------------------------------------------------------------------
// Construction by name

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Kubo,
    Pendulum,
    Lotka,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Kubo, ModelKind::Pendulum, ModelKind::Lotka];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Kubo => "kubo",
            ModelKind::Pendulum => "pendulum",
            ModelKind::Lotka => "lotka",
        }
    }

    /// Parameter names with their defaults.
    pub fn default_params(self) -> &'static [(&'static str, f64)] {
        match self {
            ModelKind::Kubo => &[("a", 1.0), ("sigma", 1.0)],
            ModelKind::Pendulum => &[("c1", 1.0), ("c2", 0.5)],
            ModelKind::Lotka => &[("c", 0.5)],
        }
    }

    pub fn default_x0(self) -> StateVec {
        match self {
            ModelKind::Kubo => vec2(1.0, 0.0),
            ModelKind::Pendulum => vec2(0.1, 1.0),
            ModelKind::Lotka => vec3(1.0, 2.0, 1.0),
        }
    }

    /// Exponents `j` of the default step sizes `2^-j`.
    pub fn default_level_exponents(self) -> std::ops::RangeInclusive<i32> {
        match self {
            ModelKind::Kubo | ModelKind::Pendulum => 3..=8,
            ModelKind::Lotka => 5..=10,
        }
    }

    pub fn default_h_levels(self) -> Vec<f64> {
        self.default_level_exponents().map(|j| 2f64.powi(-j)).collect()
    }

    pub fn description(self) -> &'static str {
        match self {
            ModelKind::Kubo => "Kubo oscillator, d=2, m=1, I = (x^2+y^2)/2",
            ModelKind::Pendulum => "stochastic pendulum, d=2, m=2, I = p^2/2 - cos q",
            ModelKind::Lotka => "cyclic Lotka-Volterra, d=3, m=1, I1 = x+y+z, I2 = xyz",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kubo" => Ok(ModelKind::Kubo),
            "pendulum" => Ok(ModelKind::Pendulum),
            "lotka" | "lotka-volterra" | "lv" => Ok(ModelKind::Lotka),
            other => Err(Error::Config(format!(
                "unknown model '{other}'; valid models: kubo, pendulum, lotka"
            ))),
        }
    }
}

/// Parses `key=value,key=value`.
pub fn parse_params(s: &str) -> Result<Vec<(String, f64)>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|tok| {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("parameter '{tok}' is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("parameter '{tok}' has a non-numeric value")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Builds a bundled model, overriding defaults with `params`.
pub fn build_model(kind: ModelKind, params: &[(String, f64)]) -> Result<Box<dyn SdeModel>> {
    let defaults = kind.default_params();
    let mut values: Vec<f64> = defaults.iter().map(|(_, v)| *v).collect();
    for (key, v) in params {
        let slot = defaults.iter().position(|(k, _)| k == key).ok_or_else(|| {
            let names: Vec<_> = defaults.iter().map(|(k, _)| *k).collect();
            Error::Config(format!("{kind} has no parameter '{key}' (valid: {})", names.join(", ")))
        })?;
        if !v.is_finite() {
            return Err(Error::Config(format!("parameter {key} must be finite")));
        }
        values[slot] = *v;
    }
    Ok(match kind {
        ModelKind::Kubo => Box::new(KuboModel::new(values[0], values[1])?),
        ModelKind::Pendulum => Box::new(PendulumModel::new(values[0], values[1])?),
        ModelKind::Lotka => Box::new(LotkaVolterraModel::new(values[0])?),
    })
}

/// `sqrt(Σ c_r²)`, the intensity of the single Wiener process equivalent in
/// law to `Σ c_r W_r`. Schemes always combine the individual channels.
pub fn effective_noise(model: &dyn SdeModel) -> Result<f64> {
    let sc = model.special_class().ok_or_else(|| {
        Error::UnsupportedModel(format!("{} is not in the special class", model.name()))
    })?;
    Ok(sc.intensities().iter().map(|c| c * c).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kubo_fields_at_unit_state() {
        let m = build_model(ModelKind::Kubo, &[]).unwrap();
        let x = vec2(1.0, 0.0);
        assert_eq!(m.drift(&x).as_slice(), &[0.0, 1.0]);
        assert_eq!(m.invariants()[0].gradient(&x).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn pendulum_energy_value() {
        let m = build_model(ModelKind::Pendulum, &[]).unwrap();
        let e = m.invariants()[0].value(&vec2(0.1, 1.0));
        assert!((e - (0.005 - 1.0_f64.cos())).abs() < 1e-15);
        assert!((e + 0.535302).abs() < 1e-6);
    }

    #[test]
    fn lotka_initial_invariants() {
        let m = build_model(ModelKind::Lotka, &[]).unwrap();
        let x = ModelKind::Lotka.default_x0();
        assert_eq!(m.invariants()[0].value(&x), 4.0);
        assert_eq!(m.invariants()[1].value(&x), 2.0);
    }

    #[test]
    fn lotka_drift_sums_to_zero() {
        let x = vec3(0.3, 1.7, 2.9);
        let f = LotkaVolterraModel::field(&x);
        assert!((f[0] + f[1] + f[2]).abs() < 1e-15);
    }

    #[test]
    fn exact_kubo_quarter_turn() {
        let x = exact_kubo(&vec2(1.0, 0.0), std::f64::consts::FRAC_PI_2, 0.0, 1.0, 1.0);
        assert!((x - vec2(0.0, 1.0)).amax() < 1e-15);
        assert_eq!(exact_kubo(&vec2(0.3, -0.4), 0.0, 0.0, 1.0, 1.0), vec2(0.3, -0.4));
    }

    #[test]
    fn effective_intensities() {
        let p = build_model(ModelKind::Pendulum, &[]).unwrap();
        assert!((effective_noise(p.as_ref()).unwrap() - 1.25_f64.sqrt()).abs() < 1e-15);
        let l = build_model(ModelKind::Lotka, &[]).unwrap();
        assert_eq!(effective_noise(l.as_ref()).unwrap(), 0.5);
        let z = build_model(ModelKind::Pendulum, &[("c1".into(), 0.0), ("c2".into(), 0.0)]).unwrap();
        assert_eq!(effective_noise(z.as_ref()).unwrap(), 0.0);
    }

    #[test]
    fn kubo_without_rotation_has_no_special_class() {
        let m = build_model(ModelKind::Kubo, &[("a".into(), 0.0)]).unwrap();
        assert!(m.special_class().is_none());
        assert!(matches!(effective_noise(m.as_ref()), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn names_and_params() {
        assert!("nosuch".parse::<ModelKind>().unwrap_err().to_string().contains("kubo, pendulum, lotka"));
        assert_eq!("LV".parse::<ModelKind>().unwrap(), ModelKind::Lotka);
        assert_eq!(
            parse_params("a=2, sigma=0.5").unwrap(),
            vec![("a".to_string(), 2.0), ("sigma".to_string(), 0.5)]
        );
        assert!(parse_params("a").is_err());
        assert!(build_model(ModelKind::Kubo, &[("c".into(), 1.0)]).is_err());
    }
}
