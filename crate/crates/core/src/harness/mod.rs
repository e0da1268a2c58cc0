//! Monte-Carlo studies on the bundled models.
//!
//! A convergence study samples one fine Brownian grid per path, integrates a
//! T2 reference on it, then coarsens the same grid for every method and step
//! size. Per-path squared errors are reduced with a fixed pairwise tree, so
//! results are bit-for-bit independent of the worker count.

pub mod drift;
pub mod fit;
pub mod report;
pub mod selftest;

use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, StateVec};
use crate::model::SdeModel;
use crate::models::{build_model, ModelKind};
use crate::noise::{halve, sample_grid, RngStream, TruncationConfig};
use crate::projection::{projected_step, ProjectionConfig, Projector};
use crate::schemes::{self, Scheme, SchemeConfig, StepInput};

pub use drift::{run_drift, DriftConfig, DriftReport, DriftRow};
pub use fit::{fit_order, OrderFit};
pub use report::{ConvergenceReport, MethodErrors, StudyMetadata};

/// A supporting scheme, optionally followed by projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub scheme: Scheme,
    pub projected: bool,
}

impl MethodSpec {
    pub const fn plain(scheme: Scheme) -> Self {
        MethodSpec { scheme, projected: false }
    }

    pub const fn projected(scheme: Scheme) -> Self {
        MethodSpec { scheme, projected: true }
    }

    /// Parses a comma-separated list such as `euler,eulerP,t2`.
    pub fn parse_list(s: &str) -> Result<Vec<MethodSpec>> {
        let list: Vec<MethodSpec> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(Error::Config("empty method list".into()));
        }
        Ok(list)
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.scheme, if self.projected { "P" } else { "" })
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(scheme) = s.parse::<Scheme>() {
            return Ok(MethodSpec::plain(scheme));
        }
        match s.strip_suffix('P').or_else(|| s.strip_suffix('p')) {
            Some(base) => Ok(MethodSpec::projected(base.parse()?)),
            None => Err(s.parse::<Scheme>().unwrap_err()),
        }
    }
}

/// Default method rows of a convergence study for each model.
pub fn default_methods(kind: ModelKind) -> Vec<MethodSpec> {
    use Scheme::*;
    let mut v = vec![
        MethodSpec::plain(Euler),
        MethodSpec::projected(Euler),
        MethodSpec::plain(Milstein),
        MethodSpec::projected(Milstein),
        MethodSpec::plain(Midpoint),
    ];
    if kind != ModelKind::Kubo {
        v.push(MethodSpec::projected(Midpoint));
    }
    v.extend([
        MethodSpec::plain(T32),
        MethodSpec::projected(T32),
        MethodSpec::plain(T2),
        MethodSpec::projected(T2),
    ]);
    v
}

/// Scheme settings shared by every method of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub implicit_tol: f64,
    pub implicit_max_iter: usize,
    pub truncation: TruncationConfig,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let s = SchemeConfig::new(Scheme::Euler);
        SolverSettings {
            implicit_tol: s.implicit_tol,
            implicit_max_iter: s.implicit_max_iter,
            truncation: s.truncation,
        }
    }
}

impl SolverSettings {
    pub fn scheme_config(&self, method: Scheme) -> SchemeConfig {
        SchemeConfig {
            method,
            implicit_tol: self.implicit_tol,
            implicit_max_iter: self.implicit_max_iter,
            truncation: self.truncation,
        }
    }
}

/// Integrates one method over a sequence of increments.
pub struct Integrator<'a> {
    model: &'a dyn SdeModel,
    method: MethodSpec,
    scheme_cfg: SchemeConfig,
    projector: Option<Projector>,
}

impl<'a> Integrator<'a> {
    pub fn new(
        model: &'a dyn SdeModel,
        method: MethodSpec,
        solver: &SolverSettings,
        projection: &ProjectionConfig,
        x0: &StateVec,
    ) -> Result<Self> {
        let scheme_cfg = solver.scheme_config(method.scheme);
        scheme_cfg.validate()?;
        schemes::check_support(model, method.scheme)?;
        let projector = if method.projected {
            Some(Projector::new(model, x0, *projection)?)
        } else {
            None
        };
        Ok(Integrator { model, method, scheme_cfg, projector })
    }

    pub fn method(&self) -> MethodSpec {
        self.method
    }

    /// Runs `increments[r][n]` (one row per channel) from `x0` with step `h`,
    /// calling `observe(n, t_n, X_n)` after every accepted step. Projected
    /// steps are checked against the Newton tolerance as they are accepted.
    pub fn run<F>(&self, x0: &StateVec, increments: &[Vec<f64>], h: f64, mut observe: F) -> Result<StateVec>
    where
        F: FnMut(usize, f64, &StateVec),
    {
        let m = self.model.noise_count();
        if increments.len() != m {
            return Err(Error::Config(format!(
                "{} has {m} noise channels but {} increment rows were given",
                self.model.name(),
                increments.len()
            )));
        }
        let steps = increments.first().map_or(0, Vec::len);
        let mut x = x0.clone();
        let mut dw = vec![0.0; m];
        for n in 0..steps {
            for (slot, row) in dw.iter_mut().zip(increments) {
                *slot = row[n];
            }
            let t = n as f64 * h;
            let input = StepInput { t, x: &x, h, dw: &dw };
            let next = match &self.projector {
                None => schemes::step(self.model, &input, &self.scheme_cfg)?,
                Some(p) => {
                    let out = projected_step(self.model, &input, &self.scheme_cfg, p)?;
                    if !(out.residual <= p.cfg.newton_tol) {
                        return Err(Error::ConservationViolated {
                            step: n + 1,
                            residual: out.residual,
                            tol: p.cfg.newton_tol,
                        });
                    }
                    out.state
                }
            };
            if !all_finite(&next) {
                return Err(Error::Evaluation {
                    what: format!("{} step {}", self.method, n + 1),
                    state: x.iter().copied().collect(),
                });
            }
            x = next;
            observe(n + 1, (n + 1) as f64 * h, &x);
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub model: ModelKind,
    pub params: Vec<(String, f64)>,
    /// Initial state; the model default when `None`.
    pub x0: Option<Vec<f64>>,
    pub methods: Vec<MethodSpec>,
    pub t_end: f64,
    pub h_levels: Vec<f64>,
    pub h_ref: f64,
    /// Extra dyadic refinements of the sampled grid below `h_ref`.
    pub grid_refinement: u32,
    pub paths: u64,
    pub seed: u64,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
    pub solver: SolverSettings,
    pub projection: ProjectionConfig,
}

impl StudyConfig {
    /// Full-scale defaults for `kind`.
    pub fn for_model(kind: ModelKind) -> Self {
        StudyConfig {
            model: kind,
            params: Vec::new(),
            x0: None,
            methods: default_methods(kind),
            t_end: 1.0,
            h_levels: kind.default_h_levels(),
            h_ref: 2f64.powi(-14),
            grid_refinement: 0,
            paths: 10_000,
            seed: 20_190_101,
            workers: 0,
            solver: SolverSettings::default(),
            projection: ProjectionConfig::default(),
        }
    }

    pub fn initial_state(&self) -> Result<StateVec> {
        match &self.x0 {
            None => Ok(self.model.default_x0()),
            Some(v) => {
                let d = self.model.default_x0().len();
                if v.len() != d {
                    return Err(Error::Config(format!("{} needs an initial state of length {d}", self.model)));
                }
                Ok(StateVec::from_column_slice(v))
            }
        }
    }

    /// Number of reference steps and, per level, the coarsening factor
    /// relative to the sampled grid.
    fn layout(&self) -> Result<(usize, usize, Vec<usize>)> {
        if !(self.t_end > 0.0) || !(self.h_ref > 0.0) {
            return Err(Error::Config("t_end and h_ref must be positive".into()));
        }
        let n_ref = integral_ratio(self.t_end, self.h_ref)
            .ok_or_else(|| Error::Config(format!("T = {} is not a multiple of h_ref = {}", self.t_end, self.h_ref)))?;
        let refine = 1usize
            .checked_shl(self.grid_refinement)
            .filter(|r| *r <= 1 << 8)
            .ok_or_else(|| Error::Config("grid_refinement too large".into()))?;
        let factors = self
            .h_levels
            .iter()
            .map(|&h| {
                integral_ratio(h, self.h_ref)
                    .filter(|f| f.is_power_of_two() && n_ref % f == 0)
                    .map(|f| f * refine)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "step {h} is not h_ref = {} times a power of two dividing T/h_ref",
                            self.h_ref
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((n_ref, refine, factors))
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config("at least one path is required".into()));
        }
        self.layout()?;
        self.solver.scheme_config(Scheme::Euler).validate()?;
        self.projection.validate()?;
        self.initial_state()?;
        Ok(())
    }
}

fn integral_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = r.round();
    ((r - n).abs() <= 1e-9 * n.max(1.0) && n >= 1.0).then_some(n as usize)
}

/// Pairwise (balanced tree) sum with a split point that depends only on the
/// length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Dyadic coarsenings of a grid, built by repeated halving.
struct Pyramid {
    levels: Vec<Vec<Vec<f64>>>,
}

impl Pyramid {
    fn new(fine: Vec<Vec<f64>>, max_factor: usize) -> Self {
        let mut levels = vec![fine];
        let mut f = 1;
        while f < max_factor {
            let next = levels.last().unwrap().iter().map(|c| halve(c)).collect();
            levels.push(next);
            f <<= 1;
        }
        Pyramid { levels }
    }

    fn at(&self, factor: usize) -> &[Vec<f64>] {
        &self.levels[factor.trailing_zeros() as usize]
    }
}

fn run_in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

/// Squared final-time errors of every (method, level) on a single path,
/// flattened method-major.
pub fn path_squared_errors(
    cfg: &StudyConfig,
    model: &dyn SdeModel,
    integrators: &[Integrator<'_>],
    reference: &Integrator<'_>,
    x0: &StateVec,
    path: u64,
) -> Result<Vec<f64>> {
    let (n_ref, refine, factors) = cfg.layout()?;
    let h_grid = cfg.h_ref / refine as f64;
    let mut stream = RngStream::new(cfg.seed, path);
    let grid = sample_grid(&mut stream, model.noise_count(), h_grid, n_ref * refine)?;
    let max_factor = factors.iter().copied().chain([refine]).max().unwrap_or(1);
    let pyramid = Pyramid::new(grid.increments, max_factor);

    let wrap = |method: MethodSpec, h: f64| {
        move |e: Error| Error::PathFailed { path, method: method.to_string(), h, source: Box::new(e) }
    };
    let x_ref = reference
        .run(x0, pyramid.at(refine), cfg.h_ref, |_, _, _| {})
        .map_err(wrap(reference.method(), cfg.h_ref))?;

    let mut out = Vec::with_capacity(integrators.len() * factors.len());
    for integ in integrators {
        for (&h, &factor) in cfg.h_levels.iter().zip(&factors) {
            let x = integ.run(x0, pyramid.at(factor), h, |_, _, _| {}).map_err(wrap(integ.method(), h))?;
            out.push((x - &x_ref).norm_squared());
        }
    }
    Ok(out)
}

/// Runs a mean-square convergence study.
pub fn run_convergence(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let started = unix_now();
    let model = build_model(cfg.model, &cfg.params)?;
    let model = model.as_ref();
    let x0 = cfg.initial_state()?;
    let integrators = cfg
        .methods
        .iter()
        .map(|&m| Integrator::new(model, m, &cfg.solver, &cfg.projection, &x0))
        .collect::<Result<Vec<_>>>()?;
    let reference = Integrator::new(model, MethodSpec::plain(Scheme::T2), &cfg.solver, &cfg.projection, &x0)?;

    let per_path: Vec<Vec<f64>> = run_in_pool(cfg.workers, || {
        (0..cfg.paths)
            .into_par_iter()
            .map(|p| path_squared_errors(cfg, model, &integrators, &reference, &x0, p))
            .collect::<Result<Vec<_>>>()
    })??;

    let levels = cfg.h_levels.len();
    let cells = cfg.methods.len() * levels;
    let mut column = vec![0.0; per_path.len()];
    let mut rms = Vec::with_capacity(cells);
    for cell in 0..cells {
        for (slot, row) in column.iter_mut().zip(&per_path) {
            *slot = row[cell];
        }
        rms.push((pairwise_sum(&column) / cfg.paths as f64).sqrt());
    }

    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let errors = rms[i * levels..(i + 1) * levels].to_vec();
            let pairs: Vec<(f64, f64)> = cfg.h_levels.iter().copied().zip(errors.iter().copied()).collect();
            MethodErrors { method: m.to_string(), h: cfg.h_levels.clone(), mse_error: errors, fit: fit_order(&pairs).ok() }
        })
        .collect();

    Ok(ConvergenceReport {
        methods,
        metadata: StudyMetadata {
            model: cfg.model.to_string(),
            params: cfg.params.clone(),
            x0: x0.iter().copied().collect(),
            t_end: cfg.t_end,
            h_ref: cfg.h_ref,
            paths: cfg.paths,
            seed: cfg.seed,
            truncation_k: cfg.solver.truncation.k,
            truncation_enabled: cfg.solver.truncation.enabled,
            projection_direction: cfg.projection.direction.to_string(),
            newton_tol: cfg.projection.newton_tol,
            started_unix: started,
            finished_unix: unix_now(),
        },
    })
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
