// SPDX-License-Identifier: MIT OR Apache-2.0

//! Piecewise-constant signals sampled on the grid `i/n`, `i = 1..=n`.
//!
//! A break `s` is the first (1-based) sample index of a new segment, so a
//! signal with breaks `s_1 < ... < s_K` takes the value `levels[k]` on
//! `s_k <= i < s_{k+1}` with the conventions `s_0 = 1` and `s_{K+1} = n + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepSignal")]
pub struct StepSignal {
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    breaks: Vec<usize>,
    levels: Vec<f64>,
}

#[derive(Deserialize)]
struct RawStepSignal {
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    breaks: Vec<usize>,
    levels: Vec<f64>,
}

impl TryFrom<RawStepSignal> for StepSignal {
    type Error = Error;

    fn try_from(raw: RawStepSignal) -> Result<Self> {
        let signal = StepSignal::new(raw.breaks, raw.levels)?;
        match raw.n {
            Some(n) => signal.with_len(n),
            None => Ok(signal),
        }
    }
}

impl StepSignal {
    /// Builds a signal from breakpoints and levels. The input is validated but
    /// not normalized; see [`StepSignal::normalized`].
    pub fn new(breaks: Vec<usize>, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != breaks.len() + 1 {
            return Err(Error::invalid(format!(
                "expected {} levels for {} breaks, got {}",
                breaks.len() + 1,
                breaks.len(),
                levels.len()
            )));
        }
        if let Some(&first) = breaks.first() {
            if first < 2 {
                return Err(Error::invalid(format!("break {first} must be >= 2")));
            }
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breaks must be strictly increasing"));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("levels must be finite"));
        }
        Ok(Self {
            n: None,
            breaks,
            levels,
        })
    }

    pub fn constant(level: f64) -> Self {
        Self {
            n: None,
            breaks: Vec::new(),
            levels: vec![level],
        }
    }

    /// Builds a signal from fractional change locations `tau` in `(0, 1)`.
    /// Each break is `round(n * tau)`, with halves rounded up.
    pub fn from_fractions(taus: &[f64], levels: Vec<f64>, n: usize) -> Result<Self> {
        let breaks = taus.iter().map(|&t| (t * n as f64 + 0.5).floor() as usize).collect();
        Self::new(breaks, levels)?.with_len(n)
    }

    /// Attaches a sample count, checking every break fits.
    pub fn with_len(mut self, n: usize) -> Result<Self> {
        self.check_len(n)?;
        self.n = Some(n);
        Ok(self)
    }

    pub fn n_hint(&self) -> Option<usize> {
        self.n
    }

    pub fn breaks(&self) -> &[usize] {
        &self.breaks
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn num_breaks(&self) -> usize {
        self.breaks.len()
    }

    /// Change locations as fractions `s_k / n`.
    pub fn taus(&self, n: usize) -> Vec<f64> {
        self.breaks.iter().map(|&s| s as f64 / n as f64).collect()
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("sample count must be positive"));
        }
        if let Some(&last) = self.breaks.last() {
            if last > n {
                return Err(Error::invalid(format!("break {last} exceeds sample count {n}")));
            }
        }
        Ok(())
    }

    /// Merges neighbouring segments with equal levels.
    pub fn normalized(&self) -> Self {
        let mut breaks = Vec::with_capacity(self.breaks.len());
        let mut levels = vec![self.levels[0]];
        for (&s, &level) in self.breaks.iter().zip(&self.levels[1..]) {
            if level != *levels.last().unwrap() {
                breaks.push(s);
                levels.push(level);
            }
        }
        Self {
            n: self.n,
            breaks,
            levels,
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.levels.windows(2).all(|w| w[0] != w[1])
    }

    /// Value at sample index `i` (1-based) of an `n`-point grid.
    pub fn eval(&self, i: usize, n: usize) -> Result<f64> {
        self.check_len(n)?;
        if i == 0 || i > n {
            return Err(Error::invalid(format!("sample index {i} outside 1..={n}")));
        }
        Ok(self.levels[self.breaks.partition_point(|&s| s <= i)])
    }

    /// Samples the signal at every grid point `1..=n`.
    pub fn sample(&self, n: usize) -> Result<Vec<f64>> {
        self.check_len(n)?;
        let mut out = Vec::with_capacity(n);
        for (start, end, level) in self.segments(n) {
            out.extend(std::iter::repeat_n(level, end + 1 - start));
        }
        Ok(out)
    }

    /// Iterates `(first, last, level)` for each segment, with 1-based inclusive bounds.
    ///
    /// The caller must have checked `n` with [`StepSignal::check_len`].
    pub fn segments(&self, n: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let starts = std::iter::once(1).chain(self.breaks.iter().copied());
        let ends = self.breaks.iter().map(|&s| s - 1).chain(std::iter::once(n));
        starts
            .zip(ends)
            .zip(self.levels.iter().copied())
            .map(|((a, b), v)| (a, b, v))
    }
}

/// Mean squared and mean absolute difference of two signals on the grid.
pub fn signal_distance(a: &StepSignal, b: &StepSignal, n: usize) -> Result<(f64, f64)> {
    let xa = a.sample(n)?;
    let xb = b.sample(n)?;
    let (mut sq, mut abs) = (0.0, 0.0);
    for (u, v) in xa.iter().zip(&xb) {
        let d = u - v;
        sq += d * d;
        abs += d.abs();
    }
    Ok((sq / n as f64, abs / n as f64))
}

/// Largest distance from a true change location to its nearest estimate, on
/// the `[0, 1]` scale. An estimate without breaks yields `f64::INFINITY`.
pub fn cp_distance(truth: &StepSignal, est: &StepSignal, n: usize) -> f64 {
    if est.breaks.is_empty() {
        return f64::INFINITY;
    }
    truth
        .breaks
        .iter()
        .map(|&t| est.breaks.iter().map(|&s| t.abs_diff(s)).min().unwrap_or(usize::MAX))
        .max()
        .map_or(0.0, |d| d as f64 / n as f64)
}
