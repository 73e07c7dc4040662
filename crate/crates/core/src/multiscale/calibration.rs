// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo calibration of the threshold `q`.
//!
//! The null statistic is the multiscale statistic of iid `N(0, 1)` data
//! against the zero signal with `sigma = 1`. Replicate `r` draws from
//! stream `r` of the base seed, so results do not depend on scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::penalty_unchecked;
use crate::error::{Error, Result};
use crate::noise::Seed;

pub const MIN_MC_REPS: usize = 100;
pub const DEFAULT_MC_REPS: usize = 10_000;
pub const DEFAULT_CALIBRATION_SEED: u64 = 20_190_301;

/// Null statistic for one replicate.
pub fn null_statistic(n: usize, min_len: usize, seed: Seed) -> f64 {
    let tables = NullTables::new(n);
    let mut prefix = Vec::with_capacity(n + 1);
    tables.statistic(n, min_len, seed, &mut prefix)
}

struct NullTables {
    pen: Vec<f64>,
    inv_sqrt: Vec<f64>,
}

impl NullTables {
    fn new(n: usize) -> Self {
        let pen = (0..=n)
            .map(|m| if m == 0 { 0.0 } else { penalty_unchecked(m, n) })
            .collect();
        let inv_sqrt = (0..=n).map(|m| 1.0 / (m as f64).sqrt()).collect();
        Self { pen, inv_sqrt }
    }

    fn statistic(&self, n: usize, min_len: usize, seed: Seed, prefix: &mut Vec<f64>) -> f64 {
        let mut rng = seed.rng();
        prefix.clear();
        prefix.push(0.0);
        let mut acc = 0.0;
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            acc += z;
            prefix.push(acc);
        }
        let mut best = f64::NEG_INFINITY;
        for j in min_len..=n {
            let pj = prefix[j];
            for m in min_len..=j {
                let v = (pj - prefix[j - m]).abs() * self.inv_sqrt[m] - self.pen[m];
                if v > best {
                    best = v;
                }
            }
        }
        best
    }
}

/// Sorted sample of the null statistic.
#[derive(Clone, Debug)]
pub struct NullDistribution {
    pub n: usize,
    pub min_len: usize,
    pub seed: u64,
    sorted: Vec<f64>,
}

impl NullDistribution {
    pub fn reps(&self) -> usize {
        self.sorted.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Empirical `(1 - alpha)` quantile: the order statistic at 1-based rank `ceil((1 - alpha) reps)`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let reps = self.sorted.len();
        // guard against 0.9 * 10000 = 9000.000000000002
        let rank = ((1.0 - alpha) * reps as f64 - 1e-9).ceil().max(1.0) as usize;
        Ok(self.sorted[rank.min(reps) - 1])
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Simulates `reps` null statistics in parallel.
pub fn null_distribution(n: usize, min_len: usize, reps: usize, seed: u64) -> Result<NullDistribution> {
    if n == 0 || min_len == 0 || min_len > n {
        return Err(Error::invalid(format!(
            "need 1 <= min_len <= n, got min_len={min_len}, n={n}"
        )));
    }
    if reps < MIN_MC_REPS {
        return Err(Error::invalid(format!(
            "need at least {MIN_MC_REPS} Monte-Carlo repetitions, got {reps}"
        )));
    }
    let tables = NullTables::new(n);
    let mut sorted: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n + 1),
            |prefix, r| tables.statistic(n, min_len, Seed::new(seed, r), prefix),
        )
        .collect();
    sorted.sort_by(f64::total_cmp);
    Ok(NullDistribution {
        n,
        min_len,
        seed,
        sorted,
    })
}

/// `(1 - alpha)` quantile of the null statistic from `reps` seeded simulations.
pub fn mc_quantile(n: usize, min_len: usize, alpha: f64, reps: usize, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    null_distribution(n, min_len, reps, seed)?.quantile(alpha)
}

/// Persistent memo of calibrated quantiles, keyed `"n:min_len:alpha:reps:seed"`.
#[derive(Clone, Debug, Default)]
pub struct QuantileCache {
    entries: BTreeMap<String, f64>,
    dirty: bool,
}

impl QuantileCache {
    pub fn key(n: usize, min_len: usize, alpha: f64, reps: usize, seed: u64) -> String {
        format!("{n}:{min_len}:{alpha}:{reps}:{seed}")
    }

    /// Loads a cache file; a missing file yields an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => Ok(Self {
                entries: serde_json::from_str(&text)?,
                dirty: false,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_string_pretty(&self.entries)?)?;
        Ok(())
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, n: usize, min_len: usize, alpha: f64, reps: usize, seed: u64) -> Option<f64> {
        self.entries.get(&Self::key(n, min_len, alpha, reps, seed)).copied()
    }

    pub fn insert(&mut self, n: usize, min_len: usize, alpha: f64, reps: usize, seed: u64, q: f64) {
        self.entries.insert(Self::key(n, min_len, alpha, reps, seed), q);
        self.dirty = true;
    }

    /// Cached value, or a fresh simulation that is then recorded.
    pub fn quantile(&mut self, n: usize, min_len: usize, alpha: f64, reps: usize, seed: u64) -> Result<f64> {
        if let Some(q) = self.get(n, min_len, alpha, reps, seed) {
            return Ok(q);
        }
        let q = mc_quantile(n, min_len, alpha, reps, seed)?;
        self.insert(n, min_len, alpha, reps, seed, q);
        Ok(q)
    }

    /// Records every requested quantile of one simulated null distribution.
    pub fn insert_all(&mut self, dist: &NullDistribution, alphas: &[f64]) -> Result<()> {
        for &a in alphas {
            let q = dist.quantile(a)?;
            self.insert(dist.n, dist.min_len, a, dist.reps(), dist.seed, q);
        }
        Ok(())
    }
}
