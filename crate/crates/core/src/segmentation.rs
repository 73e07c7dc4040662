// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal-jump segmentation inside the multiscale acceptance region.
//!
//! The estimator first finds the smallest number of change points for which
//! some step function passes the multiscale test, then picks among those the
//! least-squares fit. Both steps run as dynamic programs over a sweep that
//! maintains, for every start `i`, the interval `I(i, j)` of levels a
//! constant segment `[i, j]` may take.

use serde::ser::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::multiscale::calibration::{mc_quantile, DEFAULT_CALIBRATION_SEED, DEFAULT_MC_REPS};
use crate::multiscale::{constraint_interval, default_min_len, v_stat, QuantileCache, ScaleConfig, ValueInterval};
use crate::signal::StepSignal;
use crate::variance::{LrvEstimate, VarianceEstimator};

/// Relative tolerance under which two segmentation costs count as tied.
const TIE_RTOL: f64 = 1e-11;

/// Largest series accepted by [`brute_force_detect`].
pub const BRUTE_FORCE_MAX_N: usize = 16;

fn ties_or_beats(candidate: f64, best: f64) -> bool {
    candidate <= best + TIE_RTOL * (1.0 + best.abs())
}

/// Feasible level intervals `I(i, j)` for all starts `i <= j` at one right endpoint.
pub struct FeasibleBounds<'a> {
    j: usize,
    first: usize,
    lo: &'a [f64],
    hi: &'a [f64],
}

impl FeasibleBounds<'_> {
    pub fn end(&self) -> usize {
        self.j
    }

    /// Smallest start with a non-empty interval. Feasibility is monotone:
    /// `I(i, j)` is non-empty exactly for `first_feasible() <= i <= j`.
    pub fn first_feasible(&self) -> usize {
        self.first
    }

    /// `I(i, j)` for a 1-based start `i <= j`.
    pub fn interval(&self, i: usize) -> ValueInterval {
        assert!(i >= 1 && i <= self.j, "start {i} outside 1..={}", self.j);
        if i < self.first {
            ValueInterval::EMPTY
        } else {
            ValueInterval::new(self.lo[i], self.hi[i])
        }
    }
}

/// Walks right endpoints `j = 1..=n` and hands `visit` the intervals
/// `I(i, j) = ∩ { C(l, r) : i <= l <= r <= j, r - l + 1 >= min_len }`,
/// where `C(l, r)` is [`constraint_interval`] of the local mean.
///
/// Each step scans `l` downward from `j - min_len + 1`, accumulating the
/// suffix intersection of the new constraints `C(l, j)`, and stops at the
/// first start whose interval becomes empty since all earlier starts are
/// then empty as well.
pub fn feasibility_sweep<F>(y: &[f64], cfg: &ScaleConfig, mut visit: F) -> Result<()>
where
    F: FnMut(&FeasibleBounds<'_>),
{
    let n = y.len();
    if n != cfg.n {
        return Err(Error::invalid(format!(
            "series has {n} samples, config expects {}",
            cfg.n
        )));
    }
    let widths = cfg.half_widths();
    let prefix = prefix_sums(y);
    let mut lo = vec![f64::NEG_INFINITY; n + 1];
    let mut hi = vec![f64::INFINITY; n + 1];
    let mut first = 1;
    for j in 1..=n {
        if j >= cfg.min_len {
            let (mut dlo, mut dhi) = (f64::NEG_INFINITY, f64::INFINITY);
            let pj = prefix[j];
            for l in (first..=j + 1 - cfg.min_len).rev() {
                let m = j + 1 - l;
                let mean = (pj - prefix[l - 1]) / m as f64;
                dlo = dlo.max(mean - widths[m]);
                dhi = dhi.min(mean + widths[m]);
                lo[l] = lo[l].max(dlo);
                hi[l] = hi[l].min(dhi);
                if !(lo[l] <= hi[l]) {
                    first = l + 1;
                    break;
                }
            }
        }
        visit(&FeasibleBounds {
            j,
            first,
            lo: &lo,
            hi: &hi,
        });
    }
    Ok(())
}

fn prefix_sums(y: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(y.len() + 1);
    p.push(0.0);
    let mut acc = 0.0;
    for v in y {
        acc += v;
        p.push(acc);
    }
    p
}

/// How the threshold `q` is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    /// Calibrate `q` as the `(1 - alpha)` null quantile.
    Alpha(f64),
    /// Use `q` directly.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig {
    pub threshold: Threshold,
    /// Smallest tested interval length; defaults to [`default_min_len`].
    pub min_len: Option<usize>,
    pub variance: VarianceEstimator,
    pub mc_reps: usize,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: Threshold::Alpha(0.5),
            min_len: None,
            variance: VarianceEstimator::default(),
            mc_reps: DEFAULT_MC_REPS,
            seed: DEFAULT_CALIBRATION_SEED,
        }
    }
}

impl DetectorConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            threshold: Threshold::Alpha(alpha),
            ..Self::default()
        }
    }

    pub fn with_q(q: f64) -> Self {
        Self {
            threshold: Threshold::Fixed(q),
            ..Self::default()
        }
    }

    pub fn resolved_min_len(&self, n: usize) -> usize {
        self.min_len.unwrap_or_else(|| default_min_len(n))
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.threshold {
            Threshold::Alpha(a) => Some(a),
            Threshold::Fixed(_) => None,
        }
    }
}

/// Estimated step function together with the quantities that certify it.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub k_hat: usize,
    pub signal: StepSignal,
    /// Feasible level range of each fitted segment.
    pub level_intervals: Vec<ValueInterval>,
    pub q_used: f64,
    pub alpha: Option<f64>,
    pub sigma_used: f64,
    pub min_len: usize,
    pub sse: f64,
    pub v_value: f64,
    pub lrv: Option<LrvEstimate>,
}

impl Fit {
    pub fn breaks(&self) -> &[usize] {
        self.signal.breaks()
    }

    pub fn levels(&self) -> &[f64] {
        self.signal.levels()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("fit serializes")
    }
}

#[derive(serde::Serialize)]
struct FitJson<'a> {
    k_hat: usize,
    breaks: &'a [usize],
    levels: &'a [f64],
    level_intervals: &'a [ValueInterval],
    q: f64,
    alpha: Option<f64>,
    sigma: f64,
    min_len: usize,
    sse: f64,
    v_value: Option<f64>,
}

impl Serialize for Fit {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        FitJson {
            k_hat: self.k_hat,
            breaks: self.signal.breaks(),
            levels: self.signal.levels(),
            level_intervals: &self.level_intervals,
            q: self.q_used,
            alpha: self.alpha,
            sigma: self.sigma_used,
            min_len: self.min_len,
            sse: self.sse,
            v_value: self.v_value.is_finite().then_some(self.v_value),
        }
        .serialize(serializer)
    }
}

/// Resolves `sigma` and `q` from `cfg` and runs the estimator.
pub fn detect(y: &[f64], cfg: &DetectorConfig) -> Result<Fit> {
    detect_inner(y, cfg, None)
}

/// Like [`detect`], reading and recording calibrated quantiles in `cache`.
pub fn detect_cached(y: &[f64], cfg: &DetectorConfig, cache: &mut QuantileCache) -> Result<Fit> {
    detect_inner(y, cfg, Some(cache))
}

fn detect_inner(y: &[f64], cfg: &DetectorConfig, cache: Option<&mut QuantileCache>) -> Result<Fit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::invalid("empty series"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let min_len = cfg.resolved_min_len(n);
    let lrv = cfg.variance.estimate(y)?;
    if !(lrv.sigma_star > 0.0) {
        return Err(Error::Degenerate(
            "estimated long-run standard deviation is zero".into(),
        ));
    }
    let q = match cfg.threshold {
        Threshold::Fixed(q) => q,
        Threshold::Alpha(alpha) => match cache {
            Some(c) => c.quantile(n, min_len, alpha, cfg.mc_reps, cfg.seed)?,
            None => mc_quantile(n, min_len, alpha, cfg.mc_reps, cfg.seed)?,
        },
    };
    let scale = ScaleConfig::new(n, min_len, q, lrv.sigma_star)?;
    let mut fit = detect_scaled(y, &scale)?;
    fit.alpha = cfg.alpha();
    fit.lrv = Some(lrv);
    Ok(fit)
}

/// Estimator for a fully specified scale family (`sigma` and `q` given).
///
/// Ties in SSE among minimal segmentations go to the lexicographically
/// smallest break vector.
pub fn detect_scaled(y: &[f64], cfg: &ScaleConfig) -> Result<Fit> {
    let n = y.len();
    if n != cfg.n {
        return Err(Error::invalid(format!(
            "series has {n} samples, config expects {}",
            cfg.n
        )));
    }
    // The programs run on the reversed series: a prefix of `z` is a suffix of
    // `y`, so backtracking from the end of `z` yields breaks of `y` from left
    // to right and the lexicographic tie-break becomes a greedy choice.
    let z: Vec<f64> = y.iter().rev().copied().collect();

    // pass 1: minimal segment counts. minseg is nondecreasing, so the best
    // predecessor is always the first feasible start.
    let mut minseg = vec![0usize; n + 1];
    feasibility_sweep(&z, cfg, |b| {
        minseg[b.end()] = minseg[b.first_feasible() - 1] + 1;
    })?;
    let segments = minseg[n];
    let k_hat = segments - 1;

    // pass 2: least squares over partitions of z[..t] into k feasible segments.
    let center = z.iter().sum::<f64>() / n as f64;
    let (mut ps, mut pq) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    for (t, v) in z.iter().enumerate() {
        let c = v - center;
        ps[t + 1] = ps[t] + c;
        pq[t + 1] = pq[t] + c * c;
    }
    let raw = prefix_sums(&z);
    let width = n + 1;
    let states = (segments + 1) * width;
    let mut cost = vec![f64::INFINITY; states];
    let mut arg = vec![0usize; states];
    let mut chosen = vec![ValueInterval::EMPTY; states];
    cost[0] = 0.0;

    feasibility_sweep(&z, cfg, |b| {
        let t = b.end();
        let lo_k = minseg[t];
        for i in b.first_feasible()..=t {
            let m = (t + 1 - i) as f64;
            let iv = b.interval(i);
            let mean = (raw[t] - raw[i - 1]) / m;
            let dev = mean - iv.clamp(mean);
            let sc = ps[t] - ps[i - 1];
            let within = (pq[t] - pq[i - 1] - sc * sc / m).max(0.0);
            let seg_cost = within + m * dev * dev;
            let lo_prev = minseg[i - 1];
            for k in lo_k.max(lo_prev + 1)..=segments {
                let prev = cost[(k - 1) * width + i - 1];
                if !prev.is_finite() {
                    continue;
                }
                let c = prev + seg_cost;
                let slot = k * width + t;
                if ties_or_beats(c, cost[slot]) {
                    cost[slot] = c;
                    arg[slot] = i;
                    chosen[slot] = iv;
                }
            }
        }
    })?;

    let mut breaks = Vec::with_capacity(k_hat);
    let mut levels = Vec::with_capacity(segments);
    let mut level_intervals = Vec::with_capacity(segments);
    let mut t = n;
    for k in (1..=segments).rev() {
        let slot = k * width + t;
        if !cost[slot].is_finite() {
            return Err(Error::invalid("no feasible segmentation found"));
        }
        let i = arg[slot];
        let iv = chosen[slot];
        let mean = (raw[t] - raw[i - 1]) / (t + 1 - i) as f64;
        levels.push(iv.clamp(mean));
        level_intervals.push(iv);
        // z-segment [i, t] is y-segment [n + 1 - t, n + 1 - i]
        if k > 1 {
            breaks.push(n + 2 - i);
        }
        t = i - 1;
    }
    debug_assert_eq!(t, 0);

    let signal = StepSignal::new(breaks, levels)?.with_len(n)?;
    finish_fit(y, signal, level_intervals, cfg)
}

fn finish_fit(y: &[f64], signal: StepSignal, level_intervals: Vec<ValueInterval>, cfg: &ScaleConfig) -> Result<Fit> {
    let fitted = signal.sample(cfg.n)?;
    let sse = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let v_value = v_stat(y, &signal, cfg)?;
    Ok(Fit {
        k_hat: signal.num_breaks(),
        signal,
        level_intervals,
        q_used: cfg.q,
        alpha: None,
        sigma_used: cfg.sigma,
        min_len: cfg.min_len,
        sse,
        v_value,
        lrv: None,
    })
}

/// Exhaustive reference estimator over all `2^(n-1)` break patterns.
/// `(k, sse, breaks, levels, level intervals)` of a feasible segmentation.
type Candidate = (usize, f64, Vec<usize>, Vec<f64>, Vec<ValueInterval>);

pub fn brute_force_detect(y: &[f64], cfg: &ScaleConfig) -> Result<Fit> {
    let n = y.len();
    if n == 0 || n > BRUTE_FORCE_MAX_N {
        return Err(Error::invalid(format!(
            "brute force supports 1..={BRUTE_FORCE_MAX_N} samples, got {n}"
        )));
    }
    if n != cfg.n {
        return Err(Error::invalid(format!(
            "series has {n} samples, config expects {}",
            cfg.n
        )));
    }
    let segment_interval = |a: usize, b: usize| -> ValueInterval {
        let mut iv = ValueInterval::UNBOUNDED;
        for l in a..=b {
            for r in (l + cfg.min_len - 1)..=b {
                let m = r + 1 - l;
                let mean = y[l - 1..r].iter().sum::<f64>() / m as f64;
                iv = iv.intersect(&constraint_interval(mean, m, cfg).expect("valid length"));
            }
        }
        iv
    };

    let mut best: Option<Candidate> = None;
    for mask in 0u32..(1u32 << (n - 1)) {
        let breaks: Vec<usize> = (0..n - 1).filter(|b| mask >> b & 1 == 1).map(|b| b + 2).collect();
        let k = breaks.len();
        if best.as_ref().is_some_and(|b| k > b.0) {
            continue;
        }
        let starts = std::iter::once(1).chain(breaks.iter().copied());
        let ends = breaks.iter().map(|&s| s - 1).chain(std::iter::once(n));
        let mut sse = 0.0;
        let mut levels = Vec::with_capacity(k + 1);
        let mut ivs = Vec::with_capacity(k + 1);
        let mut feasible = true;
        for (a, b) in starts.zip(ends) {
            let iv = segment_interval(a, b);
            if iv.is_empty() {
                feasible = false;
                break;
            }
            let seg = &y[a - 1..b];
            let mean = seg.iter().sum::<f64>() / seg.len() as f64;
            let theta = iv.clamp(mean);
            sse += seg.iter().map(|v| (v - theta) * (v - theta)).sum::<f64>();
            levels.push(theta);
            ivs.push(iv);
        }
        if !feasible {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bk, bsse, bbreaks, _, _)) => {
                k < *bk
                    || sse < bsse - TIE_RTOL * (1.0 + bsse.abs())
                    || (ties_or_beats(sse, *bsse) && breaks < *bbreaks)
            }
        };
        if better {
            best = Some((k, sse, breaks, levels, ivs));
        }
    }
    let (_, _, breaks, levels, ivs) = best.ok_or_else(|| Error::invalid("no feasible segmentation found"))?;
    let signal = StepSignal::new(breaks, levels)?.with_len(n)?;
    finish_fit(y, signal, ivs, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize, min_len: usize, q: f64, sigma: f64) -> ScaleConfig {
        ScaleConfig::new(n, min_len, q, sigma).unwrap()
    }

    #[test]
    fn sweep_constant_series() {
        let y = [2.5; 12];
        feasibility_sweep(&y, &cfg(12, 2, 0.0, 1.0), |b| {
            assert_eq!(b.first_feasible(), 1);
            for i in 1..=b.end() {
                assert!(b.interval(i).contains(2.5));
            }
        })
        .unwrap();
    }

    #[test]
    fn sweep_small_example() {
        let y = [0.0, 0.0, 2.0, 2.0];
        // at q = 1 the six constraints still share [-0.008, 2.008]; q = -1 separates the halves
        let c = cfg(4, 2, -1.0, 1.0);
        let mut seen = Vec::new();
        feasibility_sweep(&y, &c, |b| {
            seen.push((1..=b.end()).map(|i| b.interval(i)).collect::<Vec<_>>());
        })
        .unwrap();
        // exhaustive intersection of the tested constraints
        let direct = |a: usize, b: usize| {
            let mut iv = ValueInterval::UNBOUNDED;
            for l in a..=b {
                for r in (l + 1)..=b {
                    let mean = y[l - 1..r].iter().sum::<f64>() / (r + 1 - l) as f64;
                    iv = iv.intersect(&constraint_interval(mean, r + 1 - l, &c).unwrap());
                }
            }
            iv
        };
        assert!(seen[3][0].is_empty());
        assert!(direct(1, 4).is_empty());
        assert!(!seen[1][0].is_empty());
        assert!(!seen[3][2].is_empty());
        for j in 1..=4 {
            for i in 1..=j {
                let (a, b) = (seen[j - 1][i - 1], direct(i, j));
                assert_eq!(a.is_empty(), b.is_empty());
                if !a.is_empty() {
                    assert!(a.lo == b.lo || (a.lo - b.lo).abs() < 1e-12);
                    assert!(a.hi == b.hi || (a.hi - b.hi).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sweep_intervals_nest() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..80)
            .map(|i| if i < 40 { 0.0 } else { 1.5 } + rng.random_range(-1.0..1.0))
            .collect();
        let c = cfg(80, 3, 0.5, 0.6);
        let mut prev: Vec<ValueInterval> = Vec::new();
        feasibility_sweep(&y, &c, |b| {
            for (idx, p) in prev.iter().enumerate() {
                let cur = b.interval(idx + 1);
                if p.is_empty() {
                    assert!(cur.is_empty());
                } else if !cur.is_empty() {
                    assert!(cur.lo >= p.lo && cur.hi <= p.hi);
                }
            }
            prev = (1..=b.end()).map(|i| b.interval(i)).collect();
        })
        .unwrap();
    }

    #[test]
    fn detect_small_example() {
        let y = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        let c = cfg(6, 1, 1.0, 1.0);
        let fit = detect_scaled(&y, &c).unwrap();
        assert_eq!(fit.k_hat, 1);
        assert_eq!(fit.breaks(), &[4]);
        assert!((fit.levels()[0]).abs() < 1e-6 && (fit.levels()[1] - 10.0).abs() < 1e-6);
        assert_eq!(brute_force_detect(&y, &c).unwrap(), fit);
    }

    #[test]
    fn detect_constant() {
        let y = [4.25; 30];
        let fit = detect_scaled(&y, &cfg(30, 3, 0.0, 1.0)).unwrap();
        assert_eq!(fit.k_hat, 0);
        assert_eq!(fit.levels(), &[4.25]);
        assert_eq!(fit.sse, 0.0);
        assert_eq!(brute_force_detect(&y[..10], &cfg(10, 3, 0.0, 1.0)).unwrap().k_hat, 0);
    }

    #[test]
    fn relaxed_threshold_gives_one_segment() {
        let y = [0.0, 0.0, 2.0, 2.0];
        assert_eq!(brute_force_detect(&y, &cfg(4, 2, 10.0, 1.0)).unwrap().k_hat, 0);
        assert_eq!(detect_scaled(&y, &cfg(4, 2, 10.0, 1.0)).unwrap().k_hat, 0);
        assert_eq!(detect_scaled(&y, &cfg(4, 2, 1.0, 1.0)).unwrap().k_hat, 0);
        assert_eq!(detect_scaled(&y, &cfg(4, 2, -1.0, 1.0)).unwrap().k_hat, 1);
        assert_eq!(brute_force_detect(&y, &cfg(4, 2, -1.0, 1.0)).unwrap().k_hat, 1);
    }

    #[test]
    fn brute_force_limits() {
        assert!(brute_force_detect(&[0.0; 17], &cfg(17, 1, 0.0, 1.0)).is_err());
    }

    #[test]
    fn degenerate_sigma_is_rejected() {
        let err = detect(&[1.0; 40], &DetectorConfig::with_q(1.0)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn fit_json_schema() {
        let y = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        let fit = detect_scaled(&y, &cfg(6, 1, 1.0, 1.0)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fit.to_json()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "k_hat",
            "breaks",
            "levels",
            "level_intervals",
            "q",
            "alpha",
            "sigma",
            "min_len",
            "sse",
            "v_value",
        ] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(v["k_hat"], 1);
        assert_eq!(v["breaks"][0], 4);
        assert!(v["alpha"].is_null());
        assert_eq!(v["level_intervals"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn fit_invariants_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.random_range(20..120);
            let y: Vec<f64> = (0..n)
                .map(|i| if i % 37 < 18 { 0.0 } else { 2.0 } + rng.random_range(-1.0..1.0))
                .collect();
            let c = cfg(n, rng.random_range(1..5), rng.random_range(0.0..2.0), 0.5);
            let fit = detect_scaled(&y, &c).unwrap();
            assert!(fit.v_value <= c.q + 1e-9);
            for (lvl, iv) in fit.levels().iter().zip(&fit.level_intervals) {
                assert!(*lvl >= iv.lo - 1e-12 && *lvl <= iv.hi + 1e-12);
            }
        }
    }
}
