// SPDX-License-Identifier: MIT OR Apache-2.0

//! Long-run variance estimators that tolerate a piecewise-constant mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrvMethod {
    BlockDiff,
    IidDiff,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrvEstimate {
    pub sigma_star_sq: f64,
    pub sigma_star: f64,
    pub method: LrvMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks_used: Option<usize>,
}

impl LrvEstimate {
    fn from_sq(sigma_star_sq: f64, method: LrvMethod, block_length: Option<usize>, blocks_used: Option<usize>) -> Self {
        let sigma_star_sq = sigma_star_sq.max(0.0);
        Self {
            sigma_star_sq,
            sigma_star: sigma_star_sq.sqrt(),
            method,
            block_length,
            blocks_used,
        }
    }

    /// A user-supplied `sigma_star`.
    pub fn fixed(sigma_star: f64) -> Result<Self> {
        if !(sigma_star.is_finite() && sigma_star >= 0.0) {
            return Err(Error::invalid(format!(
                "fixed sigma must be finite and >= 0, got {sigma_star}"
            )));
        }
        Ok(Self::from_sq(sigma_star * sigma_star, LrvMethod::Fixed, None, None))
    }
}

/// Which estimator a detector uses for `sigma_star`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceEstimator {
    BlockDiff { block_length: Option<usize> },
    IidDiff,
    Fixed(f64),
}

impl Default for VarianceEstimator {
    fn default() -> Self {
        Self::BlockDiff { block_length: None }
    }
}

impl VarianceEstimator {
    pub fn estimate(&self, y: &[f64]) -> Result<LrvEstimate> {
        match *self {
            Self::BlockDiff { block_length } => block_diff_lrv(y, block_length),
            Self::IidDiff => iid_diff_lrv(y),
            Self::Fixed(s) => LrvEstimate::fixed(s),
        }
    }
}

/// `max(2, round(n^(1/3)))`, which gives 10 at `n = 1000`.
pub fn default_block_length(n: usize) -> Result<usize> {
    if n < 8 {
        return Err(Error::invalid(format!("default block length needs n >= 8, got {n}")));
    }
    Ok(cube_root_rounded(n).max(2))
}

pub(crate) fn cube_root_rounded(n: usize) -> usize {
    (n as f64).cbrt().round() as usize
}

/// Block-mean difference estimator: average squared difference of adjacent
/// block means, scaled by `k / 2`. A trailing partial block is discarded.
pub fn block_diff_lrv(y: &[f64], block_length: Option<usize>) -> Result<LrvEstimate> {
    let k = match block_length {
        Some(k) => k,
        None => default_block_length(y.len())?,
    };
    if k == 0 {
        return Err(Error::invalid("block length must be >= 1"));
    }
    let m = y.len() / k;
    if m < 2 {
        return Err(Error::invalid(format!(
            "need at least two complete blocks of length {k}, series has {} samples",
            y.len()
        )));
    }
    let means: Vec<f64> = y.chunks_exact(k).map(|b| b.iter().sum::<f64>() / k as f64).collect();
    let ss: f64 = means.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let est = k as f64 * ss / (2.0 * (m - 1) as f64);
    Ok(LrvEstimate::from_sq(est, LrvMethod::BlockDiff, Some(k), Some(m)))
}

/// First-difference estimator appropriate for independent errors.
pub fn iid_diff_lrv(y: &[f64]) -> Result<LrvEstimate> {
    let n = y.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
    }
    let ss: f64 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(LrvEstimate::from_sq(
        ss / (2.0 * (n - 1) as f64),
        LrvMethod::IidDiff,
        None,
        None,
    ))
}
