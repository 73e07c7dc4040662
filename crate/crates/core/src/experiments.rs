// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation harness: scenario definitions, seeded replicates and the
//! aggregate tables (distribution of `K_hat - K`, MSE, MAE, location histograms).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiscale::calibration::{null_distribution, QuantileCache, DEFAULT_CALIBRATION_SEED, DEFAULT_MC_REPS};
use crate::multiscale::{default_min_len, ScaleConfig};
use crate::noise::{NoiseModel, Seed, DEFAULT_BURN_IN};
use crate::segmentation::detect_scaled;
use crate::signal::{signal_distance, StepSignal};
use crate::variance::VarianceEstimator;

pub const DEFAULT_REPS: usize = 250;
pub const FULL_REPS: usize = 1000;
pub const DEFAULT_HISTOGRAM_BIN: usize = 10;
pub const DEFAULT_SCENARIO_SEED: u64 = 1;

/// Labels of the `K_hat - K` bins, clamped at +-3.
pub const KDIFF_LABELS: [&str; 7] = ["<=-3", "-2", "-1", "0", "+1", "+2", ">=+3"];

pub const BENCHMARK_BREAKS: [usize; 5] = [101, 301, 501, 551, 751];

/// One estimator configuration evaluated in a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub variance: VarianceEstimator,
    #[serde(default)]
    pub min_len: Option<usize>,
}

impl Variant {
    pub fn dep_smuce(block_length: usize, min_len: Option<usize>) -> Self {
        Self {
            name: "DepSMUCE".into(),
            variance: VarianceEstimator::BlockDiff {
                block_length: Some(block_length),
            },
            min_len,
        }
    }

    pub fn smuce(min_len: Option<usize>) -> Self {
        Self {
            name: "SMUCE".into(),
            variance: VarianceEstimator::IidDiff,
            min_len,
        }
    }

    pub fn resolved_min_len(&self, n: usize) -> usize {
        self.min_len.unwrap_or_else(|| default_min_len(n))
    }
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}
fn default_mc_reps() -> usize {
    DEFAULT_MC_REPS
}
fn default_calibration_seed() -> u64 {
    DEFAULT_CALIBRATION_SEED
}
fn default_bin_width() -> usize {
    DEFAULT_HISTOGRAM_BIN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub truth: StepSignal,
    pub noise: NoiseModel,
    pub alphas: Vec<f64>,
    pub variants: Vec<Variant>,
    pub reps: usize,
    /// Base seed; replicate `r` uses stream `r`.
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_mc_reps")]
    pub mc_reps: usize,
    #[serde(default = "default_calibration_seed")]
    pub calibration_seed: u64,
    #[serde(default = "default_bin_width")]
    pub histogram_bin: usize,
}

impl Scenario {
    fn benchmark(name: &str, levels: [f64; 6], noise: NoiseModel) -> Self {
        let truth = StepSignal::new(BENCHMARK_BREAKS.to_vec(), levels.to_vec())
            .and_then(|s| s.with_len(1000))
            .expect("valid builtin signal");
        Self {
            name: name.into(),
            n: 1000,
            truth,
            noise,
            alphas: vec![0.1, 0.5, 0.9],
            // every interval length is tested, as in the reference simulations
            variants: vec![Variant::smuce(Some(1)), Variant::dep_smuce(10, Some(1))],
            reps: DEFAULT_REPS,
            seed: DEFAULT_SCENARIO_SEED,
            burn_in: DEFAULT_BURN_IN,
            mc_reps: DEFAULT_MC_REPS,
            calibration_seed: DEFAULT_CALIBRATION_SEED,
            histogram_bin: DEFAULT_HISTOGRAM_BIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid("scenario needs at least one replicate"));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::invalid("alphas must lie in (0, 1)"));
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("scenario needs at least one variant"));
        }
        if self.histogram_bin == 0 {
            return Err(Error::invalid("histogram bin width must be positive"));
        }
        self.truth.check_len(self.n)?;
        self.noise.validate()
    }

    /// Looks up a builtin scenario by name, else reads a scenario JSON file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(s) = builtin_scenarios().into_iter().find(|s| s.name == name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if path.is_file() {
            let s: Scenario = serde_json::from_str(&fs::read_to_string(path)?)?;
            s.validate()?;
            return Ok(s);
        }
        Err(Error::UnknownScenario(name_or_path.into()))
    }

    /// The exact series replicate `rep` observes: truth plus noise from stream `rep`.
    pub fn replicate_series(&self, rep: usize) -> Result<Vec<f64>> {
        let mut y = self.truth.sample(self.n)?;
        let noise = self
            .noise
            .generate(self.n, Seed::new(self.seed, rep as u64), self.burn_in)?;
        for (v, e) in y.iter_mut().zip(noise) {
            *v += e;
        }
        Ok(y)
    }

    pub fn k_true(&self) -> usize {
        self.truth.num_breaks()
    }
}

/// The four simulation settings: two MA(1) processes, an MA(4) and an ARMA(2,6),
/// all with five jumps at 101, 301, 501, 551, 751 of n = 1000.
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::benchmark(
            "ma1_01",
            [0.0, 1.0, 0.0, 2.0, 0.0, -1.0],
            NoiseModel::ma(1.0, vec![0.1]),
        ),
        Scenario::benchmark(
            "ma1_03",
            [0.0, 1.0, 0.0, 2.0, 0.0, -1.0],
            NoiseModel::ma(1.0, vec![0.3]),
        ),
        Scenario::benchmark(
            "ma4",
            [0.0, 3.0, 0.0, 4.0, 0.0, -3.0],
            NoiseModel::ma(1.0, vec![0.9, 0.8, 0.7, 0.6]),
        ),
        Scenario::benchmark(
            "arma26",
            [0.0, 5.0, 1.0, 8.0, 1.0, -2.0],
            NoiseModel::arma(1.0, vec![0.75, -0.5], vec![0.8, 0.7, 0.6, 0.5, 0.4, 0.3]),
        ),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub variant: String,
    pub alpha: f64,
    pub k_hat: Option<usize>,
    pub breaks: Vec<usize>,
    pub mse: f64,
    pub mae: f64,
    pub q: f64,
    pub sigma: f64,
    pub error: Option<String>,
}

/// Aggregates for one `(variant, alpha)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub variant: String,
    pub alpha: f64,
    pub q: f64,
    /// Proportions over the bins of [`KDIFF_LABELS`].
    pub kdiff: [f64; 7],
    pub mean_abs_kdiff: f64,
    pub mse: f64,
    pub mae: f64,
    pub completed: usize,
    pub failed: usize,
    /// Counts of estimated break indices, bin `b` covering `b*w+1 ..= (b+1)*w`.
    pub histogram: Vec<u64>,
}

impl CellSummary {
    pub fn label(&self) -> String {
        format!("{}({})", self.variant, self.alpha)
    }

    pub fn proportion(&self, kdiff: i64) -> f64 {
        self.kdiff[kdiff_bin(kdiff)]
    }

    pub fn proportion_over(&self) -> f64 {
        self.kdiff[4..].iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub n: usize,
    pub k_true: usize,
    pub reps: usize,
    pub histogram_bin: usize,
    pub cells: Vec<CellSummary>,
    pub records: Vec<ReplicateRecord>,
}

impl ScenarioResult {
    pub fn cell(&self, variant: &str, alpha: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.variant == variant && c.alpha == alpha)
    }
}

fn kdiff_bin(d: i64) -> usize {
    (d.clamp(-3, 3) + 3) as usize
}

/// Calibrated thresholds per `(min_len, alpha)` for the scenario.
fn calibrate(s: &Scenario, cache: &mut QuantileCache) -> Result<BTreeMap<(usize, u64), f64>> {
    let mut out = BTreeMap::new();
    let mut lens: Vec<usize> = s.variants.iter().map(|v| v.resolved_min_len(s.n)).collect();
    lens.sort_unstable();
    lens.dedup();
    for min_len in lens {
        let missing = s
            .alphas
            .iter()
            .any(|&a| cache.get(s.n, min_len, a, s.mc_reps, s.calibration_seed).is_none());
        if missing {
            let dist = null_distribution(s.n, min_len, s.mc_reps, s.calibration_seed)?;
            cache.insert_all(&dist, &s.alphas)?;
        }
        for &a in &s.alphas {
            let q = cache
                .get(s.n, min_len, a, s.mc_reps, s.calibration_seed)
                .expect("calibrated above");
            out.insert((min_len, a.to_bits()), q);
        }
    }
    Ok(out)
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioResult> {
    run_scenario_cached(s, &mut QuantileCache::default())
}

pub fn run_scenario_cached(s: &Scenario, cache: &mut QuantileCache) -> Result<ScenarioResult> {
    s.validate()?;
    let thresholds = calibrate(s, cache)?;
    let per_rep: Vec<Vec<ReplicateRecord>> = (0..s.reps)
        .into_par_iter()
        .map(|r| run_replicate(s, r, &thresholds))
        .collect::<Result<_>>()?;
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    Ok(aggregate(s, &thresholds, records))
}

/// All detector records for one replicate, in (variant, alpha) order.
pub fn run_replicate(
    s: &Scenario,
    rep: usize,
    thresholds: &BTreeMap<(usize, u64), f64>,
) -> Result<Vec<ReplicateRecord>> {
    let y = s.replicate_series(rep)?;
    let mut out = Vec::with_capacity(s.variants.len() * s.alphas.len());
    for v in &s.variants {
        let min_len = v.resolved_min_len(s.n);
        let lrv = v.variance.estimate(&y);
        for &alpha in &s.alphas {
            let q = thresholds[&(min_len, alpha.to_bits())];
            let mut rec = ReplicateRecord {
                rep,
                variant: v.name.clone(),
                alpha,
                k_hat: None,
                breaks: Vec::new(),
                mse: f64::NAN,
                mae: f64::NAN,
                q,
                sigma: f64::NAN,
                error: None,
            };
            let fit = lrv.as_ref().map_err(|e| e.to_string()).and_then(|l| {
                rec.sigma = l.sigma_star;
                if !(l.sigma_star > 0.0) {
                    return Err("estimated long-run standard deviation is zero".to_string());
                }
                ScaleConfig::new(s.n, min_len, q, l.sigma_star)
                    .and_then(|cfg| detect_scaled(&y, &cfg))
                    .map_err(|e| e.to_string())
            });
            match fit {
                Ok(fit) => {
                    let (mse, mae) = signal_distance(&s.truth, &fit.signal, s.n)?;
                    rec.k_hat = Some(fit.k_hat);
                    rec.breaks = fit.breaks().to_vec();
                    rec.mse = mse;
                    rec.mae = mae;
                }
                Err(e) => rec.error = Some(e),
            }
            out.push(rec);
        }
    }
    Ok(out)
}

fn aggregate(s: &Scenario, thresholds: &BTreeMap<(usize, u64), f64>, records: Vec<ReplicateRecord>) -> ScenarioResult {
    let k_true = s.k_true() as i64;
    let bins = s.n.div_ceil(s.histogram_bin);
    let mut cells = Vec::new();
    for v in &s.variants {
        for &alpha in &s.alphas {
            let mut counts = [0usize; 7];
            let mut histogram = vec![0u64; bins];
            let (mut abs_sum, mut mse_sum, mut mae_sum) = (0.0, 0.0, 0.0);
            let (mut completed, mut failed) = (0usize, 0usize);
            for rec in records.iter().filter(|r| r.variant == v.name && r.alpha == alpha) {
                let Some(k) = rec.k_hat else {
                    failed += 1;
                    continue;
                };
                completed += 1;
                let d = k as i64 - k_true;
                counts[kdiff_bin(d)] += 1;
                abs_sum += d.unsigned_abs() as f64;
                mse_sum += rec.mse;
                mae_sum += rec.mae;
                for &b in &rec.breaks {
                    histogram[(b - 1) / s.histogram_bin] += 1;
                }
            }
            let denom = completed.max(1) as f64;
            cells.push(CellSummary {
                variant: v.name.clone(),
                alpha,
                q: thresholds[&(v.resolved_min_len(s.n), alpha.to_bits())],
                kdiff: counts.map(|c| c as f64 / denom),
                mean_abs_kdiff: abs_sum / denom,
                mse: mse_sum / denom,
                mae: mae_sum / denom,
                completed,
                failed,
                histogram,
            });
        }
    }
    ScenarioResult {
        scenario: s.name.clone(),
        n: s.n,
        k_true: s.k_true(),
        reps: s.reps,
        histogram_bin: s.histogram_bin,
        cells,
        records,
    }
}

/// Writes `<name>_kdiff.csv`, `<name>_summary.csv` and `<name>_histogram.csv`
/// into `dir` and returns their paths.
pub fn emit_tables(r: &ScenarioResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;

    let mut kdiff = String::from("variant,alpha");
    for l in KDIFF_LABELS {
        kdiff.push(',');
        kdiff.push_str(l);
    }
    kdiff.push('\n');
    let mut summary = String::from("variant,alpha,mean_abs_kdiff,mse,mae\n");
    let mut hist = String::from("variant,alpha,bin_start,bin_end,count\n");
    for c in &r.cells {
        write!(kdiff, "{},{}", c.variant, c.alpha).unwrap();
        for p in c.kdiff {
            write!(kdiff, ",{p:.3}").unwrap();
        }
        kdiff.push('\n');
        writeln!(
            summary,
            "{},{},{:.3},{:.3},{:.3}",
            c.variant, c.alpha, c.mean_abs_kdiff, c.mse, c.mae
        )
        .unwrap();
        for (b, count) in c.histogram.iter().enumerate() {
            let start = b * r.histogram_bin + 1;
            let end = ((b + 1) * r.histogram_bin).min(r.n);
            writeln!(hist, "{},{},{start},{end},{count}", c.variant, c.alpha).unwrap();
        }
    }

    let paths = [
        (dir.join(format!("{}_kdiff.csv", r.scenario)), kdiff),
        (dir.join(format!("{}_summary.csv", r.scenario)), summary),
        (dir.join(format!("{}_histogram.csv", r.scenario)), hist),
    ];
    let mut out = Vec::with_capacity(3);
    for (p, text) in paths {
        fs::write(&p, text)?;
        out.push(p);
    }
    Ok(out)
}
