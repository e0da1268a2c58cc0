//! Property checks runnable from the command line.

use crate::error::Result;
use crate::linalg::StateVec;
use crate::model::SdeModel;
use crate::models::{build_model, ModelKind};
use crate::noise::{truncation_moment_check, RngStream};
use crate::projection::{ProjectionConfig, Projector};
use crate::schemes::{self, discrete_gradient, Scheme, SchemeConfig, StepInput};
use crate::verify::{check_conserved, default_skew_gradient, finite_diff_gradient, sample_states, skew_defect};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

const STATES: usize = 1000;

fn model_checks(kind: ModelKind, model: &dyn SdeModel, seed: u64, out: &mut Vec<Check>) -> Result<()> {
    let report = check_conserved(model, STATES, seed)?;
    let worst = report.max_residual();
    out.push(check(format!("{kind}: orthogonality"), worst <= 1e-12, format!("max residual {worst:.2e}")));

    let states = sample_states(model, STATES, seed ^ 0x5a5a)?;
    let inv = model.invariants()[0].as_ref();
    let mut skew: f64 = 0.0;
    let mut recon: f64 = 0.0;
    for x in &states {
        let (s, ts) = default_skew_gradient(model, x)?;
        let g = inv.gradient(x);
        skew = skew.max(skew_defect(&s) / s.norm().max(f64::MIN_POSITIVE));
        let f = model.drift(x);
        recon = recon.max((&s * &g - &f).amax() / (1.0 + f.amax()));
        for (r, t) in ts.iter().enumerate() {
            skew = skew.max(skew_defect(t) / t.norm().max(f64::MIN_POSITIVE));
            let gr = model.diffusion(r, x);
            recon = recon.max((t * &g - &gr).amax() / (1.0 + gr.amax()));
        }
    }
    out.push(check(
        format!("{kind}: default skew-gradient"),
        skew <= 1e-14 && recon <= 1e-12,
        format!("skew defect {skew:.2e}, reconstruction {recon:.2e}"),
    ));

    let mut grad_err: f64 = 0.0;
    for x in states.iter().take(200) {
        for inv in model.invariants() {
            let fd = finite_diff_gradient(|y| inv.value(y), x, 1e-6);
            let g = inv.gradient(x);
            grad_err = grad_err.max((&fd - &g).amax() / g.amax().max(1.0));
        }
    }
    out.push(check(format!("{kind}: analytic gradients"), grad_err <= 1e-5, format!("max rel err {grad_err:.2e}")));

    let mut dg_err: f64 = 0.0;
    for pair in states.chunks_exact(2) {
        for inv in model.invariants() {
            let (x, y) = (&pair[0], &pair[1]);
            let lhs = discrete_gradient(inv.as_ref(), x, y).dot(&(y - x));
            let rhs = inv.value(y) - inv.value(x);
            let scale = inv.value(x).abs().max(inv.value(y).abs()).max(1.0);
            dg_err = dg_err.max((lhs - rhs).abs() / scale);
        }
    }
    out.push(check(format!("{kind}: discrete gradient identity"), dg_err <= 1e-13, format!("max err {dg_err:.2e}")));

    let x0 = kind.default_x0();
    let zeros = vec![0.0; model.noise_count()];
    let mut bad = Vec::new();
    for scheme in Scheme::ALL {
        if schemes::check_support(model, scheme).is_err() {
            continue;
        }
        let input = StepInput { t: 0.0, x: &x0, h: 0.0, dw: &zeros };
        match schemes::step(model, &input, &SchemeConfig::new(scheme)) {
            Ok(x) if x == x0 => {}
            _ => bad.push(scheme.label()),
        }
    }
    out.push(check(format!("{kind}: zero-step identity"), bad.is_empty(), format!("failing: {bad:?}")));

    let proj = Projector::new(model, &x0, ProjectionConfig::default())?;
    let mut moved: f64 = 0.0;
    for x in states.iter().take(200) {
        let perturbed: StateVec = &x0 + (x - &x0) * 1e-3;
        let once = proj.project(model, &x0, &perturbed)?;
        let twice = proj.project(model, &x0, &once.state)?;
        moved = moved.max((&twice.state - &once.state).norm());
    }
    let bound = 10.0 * proj.cfg.newton_tol / model.invariants()[0].gradient(&x0).norm();
    out.push(check(format!("{kind}: projection idempotence"), moved <= bound, format!("max move {moved:.2e}")));
    Ok(())
}

/// Runs every property check; the run passes iff all returned checks pass.
pub fn run_selftest(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for kind in ModelKind::ALL {
        let model = build_model(kind, &[])?;
        model_checks(kind, model.as_ref(), seed, &mut out)?;
    }
    for (h, k) in [(0.25, 1), (0.0625, 2)] {
        let est = truncation_moment_check(h, k, 1_000_000, &mut RngStream::new(seed, 0))?;
        let bound = f64::powi(h, k as i32);
        out.push(check(
            format!("truncation moment h={h}, k={k}"),
            est <= bound,
            format!("estimate {est:.3e} vs bound {bound:.3e}"),
        ));
    }
    Ok(out)
}
