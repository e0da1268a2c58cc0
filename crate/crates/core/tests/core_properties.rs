mod common;

use common::{rk4, v, SplitMix};
use proptest::prelude::*;
use sdeproj::model::{SamplingBox, SdeModel};
use sdeproj::models::{build_model, ModelKind};
use sdeproj::verify::{check_conserved, default_skew_gradient, finite_diff_gradient, sample_states, skew_defect};
use sdeproj::{Invariant, Matrix, StateVec};

/// Kubo with its drift pushed off the level set by `eps·∇I`.
struct TiltedKubo {
    eps: f64,
    inner: Box<dyn SdeModel>,
}

impl SdeModel for TiltedKubo {
    fn name(&self) -> &str {
        "tilted"
    }
    fn dim(&self) -> usize {
        2
    }
    fn noise_count(&self) -> usize {
        1
    }
    fn drift(&self, x: &StateVec) -> StateVec {
        self.inner.drift(x) + x * self.eps
    }
    fn diffusion(&self, r: usize, x: &StateVec) -> StateVec {
        self.inner.diffusion(r, x)
    }
    fn invariants(&self) -> &[Box<dyn Invariant>] {
        self.inner.invariants()
    }
    fn sampling_box(&self) -> SamplingBox {
        SamplingBox::cube(2, -2.0, 2.0)
    }
}

fn all_models() -> Vec<(ModelKind, Box<dyn SdeModel>)> {
    ModelKind::ALL.iter().map(|&k| (k, build_model(k, &[]).unwrap())).collect()
}

#[test]
fn orthogonality_on_1000_states() {
    for (kind, m) in all_models() {
        let rep = check_conserved(m.as_ref(), 1000, 7).unwrap();
        assert_eq!(rep.samples, 1000);
        assert_eq!(rep.invariants.len(), m.invariants().len());
        assert!(rep.max_residual() <= 1e-12, "{kind}: {}", rep.max_residual());
    }
}

#[test]
fn kubo_and_lotka_small_sample_bounds() {
    let kubo = build_model(ModelKind::Kubo, &[]).unwrap();
    assert!(check_conserved(kubo.as_ref(), 100, 1).unwrap().max_residual() <= 1e-14);
    let lv = build_model(ModelKind::Lotka, &[]).unwrap();
    assert!(check_conserved(lv.as_ref(), 100, 1).unwrap().max_residual() <= 1e-13);
}

#[test]
fn tilted_drift_is_detected() {
    let eps = 1e-3;
    let m = TiltedKubo { eps, inner: build_model(ModelKind::Kubo, &[]).unwrap() };
    let rep = check_conserved(&m, 200, 3).unwrap();
    // f = Ax + εx with Ax ⟂ x, so ∇I·f / (|∇I||f|) = ε|x|² / (|x|·|x|√(1+ε²)).
    let expected = eps / (1.0 + eps * eps).sqrt();
    let got = rep.invariants[0].drift;
    assert!((got - expected).abs() <= 1e-9, "{got} vs {expected}");
    assert!(rep.invariants[0].diffusion[0] <= 1e-14);
}

#[test]
fn skew_gradient_on_random_states() {
    for (kind, m) in all_models() {
        let inv = m.invariants()[0].as_ref();
        for x in sample_states(m.as_ref(), 1000, 11).unwrap() {
            let (s, ts) = default_skew_gradient(m.as_ref(), &x).unwrap();
            let g = inv.gradient(&x);
            assert!(skew_defect(&s) <= 1e-14 * s.norm().max(1e-300), "{kind}");
            assert!((&s * &g - m.drift(&x)).amax() <= 1e-12, "{kind}");
            for (r, t) in ts.iter().enumerate() {
                assert!(skew_defect(t) <= 1e-14 * t.norm().max(1e-300));
                assert!((t * &g - m.diffusion(r, &x)).amax() <= 1e-12, "{kind}");
            }
        }
    }
}

#[test]
fn kubo_skew_gradient_is_the_rotation_generator() {
    let m = build_model(ModelKind::Kubo, &[]).unwrap();
    let j = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    for theta in [0.0f64, 0.3, 2.0, 4.5] {
        let x = v(&[theta.cos(), theta.sin()]);
        let (s, ts) = default_skew_gradient(m.as_ref(), &x).unwrap();
        assert!((&s - &j).amax() <= 1e-14);
        assert!((&ts[0] - &j).amax() <= 1e-14);
    }
    // The model's own constant form agrees.
    let form = m.skew_gradient_form().unwrap();
    assert_eq!(form.s(&v(&[0.2, 0.9])), j);
}

#[test]
fn pendulum_skew_gradient_reconstruction() {
    let m = build_model(ModelKind::Pendulum, &[]).unwrap();
    let x = v(&[0.1, 1.0]);
    let (s, _) = default_skew_gradient(m.as_ref(), &x).unwrap();
    let g = m.invariants()[0].gradient(&x);
    assert!((&s * g - m.drift(&x)).amax() <= 1e-14);
}

#[test]
fn zero_drift_gives_zero_s() {
    // Kubo with a = 0 has f ≡ 0.
    let m = build_model(ModelKind::Kubo, &[("a".into(), 0.0)]).unwrap();
    let (s, _) = default_skew_gradient(m.as_ref(), &v(&[0.4, -0.7])).unwrap();
    assert_eq!(s, Matrix::zeros(2, 2));
}

#[test]
fn degenerate_gradient_is_reported() {
    let m = build_model(ModelKind::Kubo, &[]).unwrap();
    let err = default_skew_gradient(m.as_ref(), &v(&[0.0, 0.0])).unwrap_err();
    assert!(err.is_numerical());
    assert!(err.to_string().contains("gradient"), "{err}");
}

#[test]
fn hessians_match_finite_differences() {
    for (kind, m) in all_models() {
        for x in sample_states(m.as_ref(), 100, 5).unwrap() {
            for inv in m.invariants() {
                let h = inv.hessian(&x).expect("bundled invariants carry Hessians");
                assert!((&h - h.transpose()).amax() == 0.0, "{kind}: asymmetric");
                for j in 0..x.len() {
                    let col = finite_diff_gradient(|y| inv.gradient(y)[j], &x, 1e-5);
                    let scale = h.amax().max(1.0);
                    assert!((col - h.row(j).transpose()).amax() <= 1e-5 * scale, "{kind} {}", inv.label());
                }
            }
        }
    }
}

#[test]
fn gradient_first_order_consistency() {
    let mut rng = SplitMix(99);
    for (_, m) in all_models() {
        for x in sample_states(m.as_ref(), 50, 8).unwrap() {
            let mut dir = v(&(0..x.len()).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<_>>());
            dir /= dir.norm();
            for inv in m.invariants() {
                let g = inv.gradient(&x);
                let rem = |e: f64| (inv.value(&(&x + &dir * e)) - inv.value(&x) - e * g.dot(&dir)).abs();
                // Remainder is O(ε²): halving ε cuts it by about four.
                let (r1, r2) = (rem(1e-3), rem(5e-4));
                assert!(r1 < 1e-4 && r2 <= r1 * 0.3 + 1e-15, "{r1} {r2}");
            }
        }
    }
}

#[test]
fn taylor_coefficients_match_the_ode_flow() {
    // Each v_k is checked through the flow: φ(s) − Σ_{k≤n} v_k sᵏ = O(s^{n+1}).
    let cases = [(ModelKind::Kubo, v(&[1.0, 0.0])), (ModelKind::Pendulum, v(&[0.1, 1.0])), (ModelKind::Lotka, v(&[1.0, 2.0, 1.0]))];
    for (kind, x) in cases {
        let m = build_model(kind, &[]).unwrap();
        let sc = m.special_class().unwrap();
        let coeffs = sc.taylor_coeffs(&x, 4);
        assert_eq!(coeffs[0], m.drift(&x), "{kind}: v_1 must equal f");
        let mut pts = Vec::new();
        for s in [0.2, 0.1, 0.05, 0.025] {
            let flow = rk4(|y| m.drift(y), &x, s, 400);
            let mut approx = x.clone();
            let mut p = 1.0;
            for c in &coeffs {
                p *= s;
                approx += c * p;
            }
            pts.push((s, (flow - approx).norm()));
        }
        let slope = common::loglog_slope(&pts);
        assert!((4.7..=5.3).contains(&slope), "{kind}: slope {slope}");
    }
}

#[test]
fn pendulum_second_coefficient_by_finite_differences() {
    let m = build_model(ModelKind::Pendulum, &[]).unwrap();
    let x = v(&[0.1, 1.0]);
    let v2 = &m.special_class().unwrap().taylor_coeffs(&x, 2)[1];
    let (p, q) = (x[0], x[1]);
    let hand = v(&[-0.5 * p * q.cos(), -0.5 * q.sin()]);
    assert!((v2 - &hand).amax() <= 1e-15);
    let jac = sdeproj::verify::finite_diff_jacobian(|y| m.drift(y), &x, 1e-6);
    let fd = jac * m.drift(&x) * 0.5;
    assert!((v2 - fd).amax() <= 1e-8);
}

proptest! {
    #[test]
    fn orthogonality_holds_anywhere_in_the_box(u0 in 0.0f64..1.0, u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
        for (_, m) in all_models() {
            let x = m.sampling_box().map_unit(&[u0, u1, u2][..m.dim()]);
            let f = m.drift(&x);
            for inv in m.invariants() {
                let g = inv.gradient(&x);
                let scale = g.norm() * f.norm() + 1e-300;
                prop_assert!(g.dot(&f).abs() / scale <= 1e-12);
                for r in 0..m.noise_count() {
                    let gr = m.diffusion(r, &x);
                    prop_assert!(g.dot(&gr).abs() / (g.norm() * gr.norm() + 1e-300) <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn solve_dense_residual(a in proptest::collection::vec(-1.0f64..1.0, 9), b in proptest::collection::vec(-5.0f64..5.0, 3)) {
        let mut mat = Matrix::from_row_slice(3, 3, &a);
        for i in 0..3 {
            mat[(i, i)] += 4.0; // diagonally dominant, hence well conditioned
        }
        let rhs = v(&b);
        let x = sdeproj::linalg::solve_dense(&mat, &rhs).unwrap();
        let tol = 1e-12 * (mat.norm() * x.norm() + rhs.norm());
        prop_assert!((&mat * &x - &rhs).norm() <= tol);
    }
}
