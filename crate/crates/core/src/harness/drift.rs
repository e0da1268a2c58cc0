//! Single-path runs that record invariant errors at every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Integrator, MethodSpec, SolverSettings};
use crate::linalg::StateVec;
use crate::model::invariant_values;
use crate::models::{build_model, ModelKind};
use crate::noise::{sample_grid, RngStream};
use crate::projection::ProjectionConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub model: ModelKind,
    pub params: Vec<(String, f64)>,
    pub x0: Option<Vec<f64>>,
    pub method: MethodSpec,
    pub h: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Stream index of the sampled path.
    pub path: u64,
    pub solver: SolverSettings,
    pub projection: ProjectionConfig,
}

impl DriftConfig {
    pub fn new(model: ModelKind, method: MethodSpec, h: f64, t_end: f64, seed: u64) -> Self {
        DriftConfig {
            model,
            params: Vec::new(),
            x0: None,
            method,
            h,
            t_end,
            seed,
            path: 0,
            solver: SolverSettings::default(),
            projection: ProjectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub step: usize,
    pub t: f64,
    pub x: Vec<f64>,
    /// `|Iⁱ(X_n) − Iⁱ(X_0)|` per invariant.
    pub inv_err: Vec<f64>,
    /// `sqrt(Σ_i (Iⁱ(X_n) − Iⁱ(X_0))²)`
    pub combined_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub method: String,
    pub labels: Vec<String>,
    pub rows: Vec<DriftRow>,
}

impl DriftReport {
    pub fn max_inv_err(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.labels.len()];
        for row in &self.rows {
            for (m, e) in out.iter_mut().zip(&row.inv_err) {
                *m = f64::max(*m, *e);
            }
        }
        out
    }

    pub fn max_combined_err(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.combined_err))
    }
}

fn row(step: usize, t: f64, x: &StateVec, now: &[f64], start: &[f64]) -> DriftRow {
    let inv_err: Vec<f64> = now.iter().zip(start).map(|(a, b)| (a - b).abs()).collect();
    let combined_err = inv_err.iter().map(|e| e * e).sum::<f64>().sqrt();
    DriftRow { step, t, x: x.iter().copied().collect(), inv_err, combined_err }
}

/// Integrates one sample path with step `h` up to `t_end`, recording the state
/// and invariant errors after every step.
pub fn run_drift(cfg: &DriftConfig) -> Result<DriftReport> {
    if !(cfg.h > 0.0) || !(cfg.t_end > 0.0) {
        return Err(Error::Config("drift run needs h > 0 and t_end > 0".into()));
    }
    let ratio = cfg.t_end / cfg.h;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * steps.max(1.0) || steps < 1.0 {
        return Err(Error::Config(format!("t_end = {} is not a multiple of h = {}", cfg.t_end, cfg.h)));
    }
    let model = build_model(cfg.model, &cfg.params)?;
    let model = model.as_ref();
    let x0 = match &cfg.x0 {
        Some(v) if v.len() == model.dim() => StateVec::from_column_slice(v),
        Some(_) => return Err(Error::Config(format!("{} needs an initial state of length {}", cfg.model, model.dim()))),
        None => cfg.model.default_x0(),
    };
    let integ = Integrator::new(model, cfg.method, &cfg.solver, &cfg.projection, &x0)?;
    let mut stream = RngStream::new(cfg.seed, cfg.path);
    let grid = sample_grid(&mut stream, model.noise_count(), cfg.h, steps as usize)?;

    let start = invariant_values(model, &x0);
    let mut rows = Vec::with_capacity(steps as usize + 1);
    rows.push(row(0, 0.0, &x0, &start, &start));
    integ.run(&x0, &grid.increments, cfg.h, |n, t, x| {
        rows.push(row(n, t, x, &invariant_values(model, x), &start));
    })?;
    Ok(DriftReport {
        method: cfg.method.to_string(),
        labels: model.invariants().iter().map(|i| i.label().to_string()).collect(),
        rows,
    })
}
