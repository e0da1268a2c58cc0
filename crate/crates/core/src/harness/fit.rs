use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of `ln e = order · ln h + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub order: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

pub fn fit_order(errors: &[(f64, f64)]) -> Result<OrderFit> {
    if errors.len() < 3 {
        return Err(Error::Config(format!("order fit needs at least 3 levels, got {}", errors.len())));
    }
    if let Some(&(h, e)) = errors.iter().find(|(h, e)| !(*e > 0.0) || !(*h > 0.0) || !e.is_finite()) {
        return Err(Error::Config(format!("degenerate order fit: e({h}) = {e}")));
    }
    let n = errors.len() as f64;
    let xs: Vec<f64> = errors.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("order fit needs distinct step sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let order = sxy / sxx;
    let intercept = my - order * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - order * x).powi(2)).sum();
    Ok(OrderFit { order, intercept, residual: (ss / n).sqrt() })
}
