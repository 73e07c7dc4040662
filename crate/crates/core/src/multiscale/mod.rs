// SPDX-License-Identifier: MIT OR Apache-2.0

//! The multiscale statistic and the level constraints it induces.
//!
//! For a candidate step function the statistic scans every interval `[i, j]`
//! of length at least `min_len` lying inside one constant segment with level
//! `theta` and takes the maximum of
//!
//! ```text
//! sqrt(j - i + 1) * |mean(y[i..=j]) - theta| / sigma - sqrt(2 ln(e n / (j - i + 1)))
//! ```
//!
//! Requiring the statistic to stay below `q` is the same as asking `theta`
//! to lie in a closed interval around every tested local mean.

pub mod calibration;

use serde::ser::{Serialize, SerializeTuple, Serializer};

use crate::error::{Error, Result};
use crate::signal::StepSignal;
use crate::variance::cube_root_rounded;

pub use calibration::{mc_quantile, null_distribution, null_statistic, NullDistribution, QuantileCache};

/// Scale penalty `sqrt(2 ln(e n / m))`.
pub fn penalty(m: usize, n: usize) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!("interval length {m} outside 1..={n}")));
    }
    Ok(penalty_unchecked(m, n))
}

#[inline]
fn penalty_unchecked(m: usize, n: usize) -> f64 {
    (2.0 * (1.0 + (n as f64 / m as f64).ln())).sqrt()
}

/// `max(2, round(n^(1/3)))`, capped at `n`.
pub fn default_min_len(n: usize) -> usize {
    cube_root_rounded(n).max(2).min(n.max(1))
}

/// Parameters of the scale family tested by the statistic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleConfig {
    pub n: usize,
    pub min_len: usize,
    pub q: f64,
    pub sigma: f64,
}

impl ScaleConfig {
    pub fn new(n: usize, min_len: usize, q: f64, sigma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sample count must be positive"));
        }
        if min_len == 0 || min_len > n {
            return Err(Error::invalid(format!("min_len {min_len} outside 1..={n}")));
        }
        if !q.is_finite() || q <= -std::f64::consts::SQRT_2 {
            return Err(Error::invalid(format!(
                "threshold q = {q} must be finite and > -sqrt(2)"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!(
                "sigma must be finite and positive, got {sigma}"
            )));
        }
        Ok(Self { n, min_len, q, sigma })
    }

    /// Half-widths `sigma (q + penalty(m, n)) / sqrt(m)` indexed by `m` (entry 0 unused).
    pub(crate) fn half_widths(&self) -> Vec<f64> {
        let mut w = vec![f64::INFINITY; self.n + 1];
        for (m, slot) in w.iter_mut().enumerate().skip(1) {
            *slot = self.sigma * (self.q + penalty_unchecked(m, self.n)) / (m as f64).sqrt();
        }
        w
    }
}

/// A closed interval of admissible levels; `lo > hi` encodes the empty set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ValueInterval {
    pub const UNBOUNDED: Self = Self {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const EMPTY: Self = Self {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Closest admissible point to `x`. Panics on an empty interval.
    pub fn clamp(&self, x: f64) -> f64 {
        assert!(!self.is_empty(), "clamp onto an empty interval");
        x.max(self.lo).min(self.hi)
    }
}

/// Serialized as `[lo, hi]` with `null` for infinite ends.
impl Serialize for ValueInterval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let finite = |v: f64| v.is_finite().then_some(v);
        let mut t = serializer.serialize_tuple(2)?;
        t.serialize_element(&finite(self.lo))?;
        t.serialize_element(&finite(self.hi))?;
        t.end()
    }
}

/// Levels consistent with a local mean over `m` samples: `mean +- sigma (q + penalty) / sqrt(m)`.
pub fn constraint_interval(mean: f64, m: usize, cfg: &ScaleConfig) -> Result<ValueInterval> {
    let pen = penalty(m, cfg.n)?;
    let slack = cfg.q + pen;
    if slack < 0.0 {
        return Ok(ValueInterval::EMPTY);
    }
    let w = cfg.sigma * slack / (m as f64).sqrt();
    Ok(ValueInterval::new(mean - w, mean + w))
}

/// The multiscale statistic of `candidate` on `y`. Returns `f64::NEG_INFINITY`
/// when no segment is long enough to hold a tested interval.
pub fn v_stat(y: &[f64], candidate: &StepSignal, cfg: &ScaleConfig) -> Result<f64> {
    if y.len() != cfg.n {
        return Err(Error::invalid(format!(
            "series has {} samples, config expects {}",
            y.len(),
            cfg.n
        )));
    }
    if !(cfg.sigma.is_finite() && cfg.sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    candidate.check_len(cfg.n)?;
    let n = cfg.n;
    let pen: Vec<f64> = (0..=n)
        .map(|m| if m == 0 { 0.0 } else { penalty_unchecked(m, n) })
        .collect();
    let scale: Vec<f64> = (0..=n).map(|m| 1.0 / (cfg.sigma * (m as f64).sqrt())).collect();

    let mut best = f64::NEG_INFINITY;
    let mut prefix = Vec::with_capacity(n + 1);
    for (a, b, theta) in candidate.segments(n) {
        prefix.clear();
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &y[a - 1..b] {
            acc += v - theta;
            prefix.push(acc);
        }
        let len = b + 1 - a;
        for j in cfg.min_len..=len {
            let pj = prefix[j];
            for m in cfg.min_len..=j {
                let v = (pj - prefix[j - m]).abs() * scale[m] - pen[m];
                if v > best {
                    best = v;
                }
            }
        }
    }
    Ok(best)
}
