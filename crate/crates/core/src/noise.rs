// SPDX-License-Identifier: MIT OR Apache-2.0

//! Gaussian ARMA error processes and their long-run variance.
//!
//! The recursion follows the convention
//! `e_i = sum_l ar[l] e_{i-l} + eta_i + sum_j ma[j] eta_{i-j}` with
//! `eta_i ~ N(0, sigma_eta^2)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 1000;

const PSI_TOLERANCE: f64 = 1e-12;
const PSI_MAX_TERMS: usize = 10_000_000;

/// Reproducible random stream: `base` selects the experiment, `stream` the replicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub base: u64,
    pub stream: u64,
}

impl Seed {
    pub fn new(base: u64, stream: u64) -> Self {
        Self { base, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_eta: f64,
    #[serde(default)]
    pub ar: Vec<f64>,
    #[serde(default)]
    pub ma: Vec<f64>,
}

impl NoiseModel {
    pub fn white(sigma_eta: f64) -> Self {
        Self {
            sigma_eta,
            ar: Vec::new(),
            ma: Vec::new(),
        }
    }

    pub fn ma(sigma_eta: f64, ma: Vec<f64>) -> Self {
        Self {
            sigma_eta,
            ar: Vec::new(),
            ma,
        }
    }

    pub fn arma(sigma_eta: f64, ar: Vec<f64>, ma: Vec<f64>) -> Self {
        Self { sigma_eta, ar, ma }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_eta.is_finite() && self.sigma_eta > 0.0) {
            return Err(Error::invalid(format!(
                "sigma_eta must be positive, got {}",
                self.sigma_eta
            )));
        }
        if self.ar.iter().chain(&self.ma).any(|c| !c.is_finite()) {
            return Err(Error::invalid("ARMA coefficients must be finite"));
        }
        if !is_stationary(&self.ar) {
            return Err(Error::NonStationary(self.ar.clone()));
        }
        Ok(())
    }

    /// First `len` coefficients of the causal representation `e_i = sum_j psi_j eta_{i-j}`.
    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut psi = Vec::with_capacity(len);
        for j in 0..len {
            psi.push(self.psi_next(&psi, j));
        }
        psi
    }

    fn psi_next(&self, psi: &[f64], j: usize) -> f64 {
        let mut v = match j {
            0 => 1.0,
            _ => self.ma.get(j - 1).copied().unwrap_or(0.0),
        };
        for (l, phi) in self.ar.iter().enumerate().take(j) {
            v += phi * psi[j - 1 - l];
        }
        v
    }

    /// Autocovariance at `lag` computed from a truncated impulse response.
    pub fn autocovariance(&self, lag: usize, terms: usize) -> f64 {
        let psi = self.impulse_response(terms + lag);
        let s: f64 = psi.iter().zip(&psi[lag..]).map(|(a, b)| a * b).sum();
        s * self.sigma_eta * self.sigma_eta
    }

    /// Long-run variance `sigma_eta^2 (sum_j psi_j)^2`.
    pub fn oracle_lrv(&self) -> Result<f64> {
        self.validate()?;
        let (p, q) = (self.ar.len(), self.ma.len());
        let window = 4 * p.max(1) + 8;
        let mut psi = Vec::new();
        let mut total = 0.0;
        for j in 0..PSI_MAX_TERMS {
            let v = self.psi_next(&psi, j);
            psi.push(v);
            total += v;
            if p == 0 && j >= q {
                break;
            }
            if j > p + q + window && psi[j + 1 - window..].iter().all(|x| x.abs() < PSI_TOLERANCE) {
                break;
            }
        }
        Ok(self.sigma_eta * self.sigma_eta * total * total)
    }

    /// Simulates `n` observations after discarding `burn_in + p + q` warm-up values.
    pub fn generate(&self, n: usize, seed: Seed, burn_in: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::invalid("cannot generate an empty series"));
        }
        let (p, q) = (self.ar.len(), self.ma.len());
        let skip = burn_in + p + q;
        let total = n + skip;
        let mut rng = seed.rng();
        let eta: Vec<f64> = (0..total)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                self.sigma_eta * z
            })
            .collect();
        if p == 0 && q == 0 {
            return Ok(eta[skip..].to_vec());
        }
        let mut e = vec![0.0; total];
        for i in 0..total {
            let mut v = eta[i];
            for (j, k) in self.ma.iter().enumerate() {
                if i > j {
                    v += k * eta[i - 1 - j];
                }
            }
            for (l, phi) in self.ar.iter().enumerate() {
                if i > l {
                    v += phi * e[i - 1 - l];
                }
            }
            e[i] = v;
        }
        Ok(e.split_off(skip))
    }
}

/// Schur-Cohn step-down test: every root of `1 - sum_l ar[l] z^l` lies
/// strictly outside the unit circle iff all reflection coefficients satisfy `|k| < 1`.
pub fn is_stationary(ar: &[f64]) -> bool {
    let mut a = ar.to_vec();
    while let Some(&k) = a.last() {
        if k.abs() >= 1.0 {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..m - 1).map(|l| (a[l] + k * a[m - 2 - l]) / denom).collect();
        a = next;
    }
    true
}
