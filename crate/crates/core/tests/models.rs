mod common;

use std::f64::consts::FRAC_PI_2;

use common::{v, SplitMix};
use sdeproj::harness::{Integrator, MethodSpec, SolverSettings};
use sdeproj::models::{build_model, effective_noise, exact_kubo, parse_params, ModelKind};
use sdeproj::noise::{sample_grid, RngStream};
use sdeproj::projection::ProjectionConfig;
use sdeproj::schemes::Scheme;

#[test]
fn kubo_fields() {
    let m = build_model(ModelKind::Kubo, &[]).unwrap();
    let x = v(&[1.0, 0.0]);
    assert_eq!(m.drift(&x), v(&[0.0, 1.0]));
    assert_eq!(m.invariants()[0].gradient(&x), v(&[1.0, 0.0]));
    assert_eq!((m.dim(), m.noise_count()), (2, 1));
}

#[test]
fn pendulum_energy_at_default_state() {
    let m = build_model(ModelKind::Pendulum, &[]).unwrap();
    let e = m.invariants()[0].value(&v(&[0.1, 1.0]));
    assert!((e - (-0.535302)).abs() < 1e-6, "{e}");
    assert_eq!((m.dim(), m.noise_count()), (2, 2));
    // g_r = c_r f
    let x = v(&[0.3, -0.4]);
    assert_eq!(m.diffusion(1, &x), m.drift(&x) * 0.5);
}

#[test]
fn lotka_invariants_and_cyclic_drift() {
    let m = build_model(ModelKind::Lotka, &[]).unwrap();
    let x = v(&[1.0, 2.0, 1.0]);
    assert_eq!(m.invariants()[0].value(&x), 4.0);
    assert_eq!(m.invariants()[1].value(&x), 2.0);
    let mut rng = SplitMix(1);
    for _ in 0..100 {
        let y = v(&[rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0)]);
        assert!(m.drift(&y).sum().abs() <= 1e-14);
    }
}

#[test]
fn exact_kubo_examples() {
    let x0 = v(&[1.0, 0.0]);
    assert_eq!(exact_kubo(&x0, 0.0, 0.0, 1.0, 1.0), x0);
    let q = exact_kubo(&x0, FRAC_PI_2, 0.0, 1.0, 1.0);
    assert!((q - v(&[0.0, 1.0])).amax() <= 1e-15);
    let mut rng = SplitMix(2);
    for _ in 0..100 {
        let x = v(&[rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)]);
        let y = exact_kubo(&x, rng.uniform(0.0, 5.0), rng.uniform(-3.0, 3.0), 1.3, 0.7);
        assert!((y.norm() - x.norm()).abs() <= 1e-15 * x.norm().max(1.0) * 4.0);
    }
}

#[test]
fn exact_kubo_agrees_with_fine_t2() {
    let m = build_model(ModelKind::Kubo, &[]).unwrap();
    let x0 = v(&[1.0, 0.0]);
    let integ = Integrator::new(
        m.as_ref(),
        MethodSpec::plain(Scheme::T2),
        &SolverSettings::default(),
        &ProjectionConfig::default(),
        &x0,
    )
    .unwrap();
    let h = 2f64.powi(-14);
    let mut sq = 0.0;
    for path in 0..100 {
        let grid = sample_grid(&mut RngStream::new(2024, path), 1, h, 1 << 14).unwrap();
        let x = integ.run(&x0, &grid.increments, h, |_, _, _| {}).unwrap();
        let exact = exact_kubo(&x0, 1.0, grid.endpoint()[0], 1.0, 1.0);
        sq += (x - exact).norm_squared();
    }
    assert!(sq / 100.0 <= 1e-10, "{}", sq / 100.0);
}

#[test]
fn effective_noise_values() {
    let p = build_model(ModelKind::Pendulum, &[]).unwrap();
    assert!((effective_noise(p.as_ref()).unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
    let lv = build_model(ModelKind::Lotka, &[]).unwrap();
    assert_eq!(effective_noise(lv.as_ref()).unwrap(), 0.5);
    let quiet = build_model(ModelKind::Pendulum, &parse_params("c1=0,c2=0").unwrap()).unwrap();
    assert_eq!(effective_noise(quiet.as_ref()).unwrap(), 0.0);
    let no_special = build_model(ModelKind::Kubo, &parse_params("a=0").unwrap()).unwrap();
    assert!(effective_noise(no_special.as_ref()).is_err());
}

#[test]
fn model_construction_errors() {
    assert!("nosuch".parse::<ModelKind>().is_err());
    let msg = "nosuch".parse::<ModelKind>().unwrap_err().to_string();
    assert!(msg.contains("kubo") && msg.contains("pendulum") && msg.contains("lotka"), "{msg}");
    assert!(build_model(ModelKind::Kubo, &parse_params("b=1").unwrap()).is_err());
    assert!(parse_params("a=x").is_err());
    assert!(parse_params("a").is_err());
    assert!(build_model(ModelKind::Kubo, &[("a".into(), f64::NAN)]).is_err());
    assert_eq!("lotka-volterra".parse::<ModelKind>().unwrap(), ModelKind::Lotka);
}

#[test]
fn parameters_override_defaults() {
    let m = build_model(ModelKind::Kubo, &parse_params("a=2, sigma=0.5").unwrap()).unwrap();
    assert_eq!(m.drift(&v(&[1.0, 0.0])), v(&[0.0, 2.0]));
    assert_eq!(m.special_class().unwrap().intensities(), &[0.25]);
}
