use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("degenerate gradient (|grad I| = {norm:e}) at {state:?}")]
    DegenerateGradient { norm: f64, state: Vec<f64> },

    #[error("singular matrix: pivot {pivot:e} below threshold {threshold:e}")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("projection is rank deficient: {0}")]
    RankDeficient(String),

    #[error(
        "{solver} did not converge after {iterations} iterations \
         (residual {residual:e}) at t = {t}, h = {h}, x = {state:?}"
    )]
    Nonconvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        t: f64,
        h: f64,
        state: Vec<f64>,
    },

    #[error("non-finite value while evaluating {what} at {state:?}")]
    Evaluation { what: String, state: Vec<f64> },

    #[error("invariant residual {residual:e} exceeds tolerance {tol:e} at step {step}")]
    ConservationViolated { step: usize, residual: f64, tol: f64 },

    #[error("path {path} failed ({method}, h = {h}): {source}")]
    PathFailed {
        path: u64,
        method: String,
        h: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed report: {0}")]
    Format(String),
}

impl Error {
    /// True for failures that come from the numerics rather than from the
    /// way the run was configured.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateGradient { .. }
            | Error::SingularMatrix { .. }
            | Error::RankDeficient(_)
            | Error::Nonconvergence { .. }
            | Error::Evaluation { .. }
            | Error::ConservationViolated { .. } => true,
            Error::PathFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
