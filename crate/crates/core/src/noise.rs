//! Reproducible Wiener increments.
//!
//! Every Monte-Carlo path owns a counter-based ChaCha stream keyed by
//! `(seed, path_index)`, so a path's randomness does not depend on which
//! worker integrates it. A path samples its increments once on the finest
//! dyadic grid; coarser step sizes are obtained by summing neighbours, so all
//! methods and step sizes see the same Brownian path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Random stream for one Monte-Carlo path.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    path_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        RngStream { seed, path_index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub k: u32,
    pub enabled: bool,
}

impl TruncationConfig {
    pub const DEFAULT_K: u32 = 6;

    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("truncation k must be a positive integer".into()));
        }
        Ok(TruncationConfig { k, enabled: true })
    }

    pub fn disabled() -> Self {
        TruncationConfig { k: Self::DEFAULT_K, enabled: false }
    }

    /// `A_h = sqrt(2k |ln h|)`
    pub fn bound(&self, h: f64) -> f64 {
        (2.0 * self.k as f64 * h.ln().abs()).sqrt()
    }
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig { k: Self::DEFAULT_K, enabled: true }
    }
}

/// Clamps an `N(0, h)` increment to `±A_h sqrt(h)`.
///
/// Unclamped increments are returned bit-for-bit. A zero step carries no
/// randomness and passes through.
pub fn truncate_increment(dw: f64, h: f64, cfg: &TruncationConfig) -> Result<f64> {
    if !cfg.enabled || h == 0.0 {
        return Ok(dw);
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Config(format!(
            "increment truncation needs 0 < h < 1, got h = {h}"
        )));
    }
    if cfg.k == 0 {
        return Err(Error::Config("truncation k must be a positive integer".into()));
    }
    let limit = cfg.bound(h) * h.sqrt();
    Ok(if dw > limit {
        limit
    } else if dw < -limit {
        -limit
    } else {
        dw
    })
}

/// Monte-Carlo estimate of `E(ξ − ζ_h)²` for standard normal `ξ` and its
/// truncation `ζ_h`.
pub fn truncation_moment_check(h: f64, k: u32, samples: usize, stream: &mut RngStream) -> Result<f64> {
    let cfg = TruncationConfig::new(k)?;
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Config(format!("truncation check needs 0 < h < 1, got {h}")));
    }
    if samples == 0 {
        return Err(Error::Config("truncation check needs samples".into()));
    }
    let a = cfg.bound(h);
    let mut acc = 0.0;
    for _ in 0..samples {
        let xi = stream.standard_normal();
        let zeta = xi.clamp(-a, a);
        acc += (xi - zeta) * (xi - zeta);
    }
    Ok(acc / samples as f64)
}

/// Untruncated `N(0, h_fine)` increments for each noise channel on a uniform
/// fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianGrid {
    pub h_fine: f64,
    pub n_fine: usize,
    /// `increments[r][n]` is channel `r` over fine step `n`.
    pub increments: Vec<Vec<f64>>,
}

/// Samples `m` channels of `n_fine` increments. Steps are drawn in time order
/// and channel-minor, so the first steps of a longer grid coincide with a
/// shorter one.
pub fn sample_grid(stream: &mut RngStream, m: usize, h_fine: f64, n_fine: usize) -> Result<BrownianGrid> {
    if !(h_fine > 0.0) || n_fine == 0 {
        return Err(Error::Config(format!(
            "grid needs h_fine > 0 and n_fine >= 1 (got {h_fine}, {n_fine})"
        )));
    }
    let sd = h_fine.sqrt();
    let mut increments = vec![Vec::with_capacity(n_fine); m];
    for _ in 0..n_fine {
        for channel in increments.iter_mut() {
            channel.push(sd * stream.standard_normal());
        }
    }
    Ok(BrownianGrid { h_fine, n_fine, increments })
}

/// Sums adjacent pairs.
pub fn halve(inc: &[f64]) -> Vec<f64> {
    inc.chunks_exact(2).map(|p| p[0] + p[1]).collect()
}

/// Sums blocks of `factor` increments. Blocks are reduced as a balanced
/// binary tree (repeated [`halve`]), so coarsening by `a` then `b` equals
/// coarsening by `ab` bit-for-bit.
pub fn coarsen_channel(inc: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::Config(format!("coarsening factor {factor} is not a power of two")));
    }
    if !inc.len().is_multiple_of(factor) {
        return Err(Error::Config(format!(
            "coarsening factor {factor} does not divide {} increments",
            inc.len()
        )));
    }
    let mut cur = inc.to_vec();
    let mut f = factor;
    while f > 1 {
        cur = halve(&cur);
        f >>= 1;
    }
    Ok(cur)
}

impl BrownianGrid {
    pub fn noise_count(&self) -> usize {
        self.increments.len()
    }

    /// Increments at step `h_fine * factor`, per channel.
    pub fn coarsen(&self, factor: usize) -> Result<Vec<Vec<f64>>> {
        self.increments.iter().map(|c| coarsen_channel(c, factor)).collect()
    }

    /// `W_r(T)` for each channel.
    pub fn endpoint(&self) -> Vec<f64> {
        self.increments.iter().map(|c| c.iter().sum()).collect()
    }
}
