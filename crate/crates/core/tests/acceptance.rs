// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use depsmuce::experiments::{
    builtin_scenarios, run_scenario_cached, Scenario, ScenarioResult, Variant, BENCHMARK_BREAKS,
};
use depsmuce::multiscale::calibration::{QuantileCache, DEFAULT_CALIBRATION_SEED, DEFAULT_MC_REPS};
use depsmuce::noise::DEFAULT_BURN_IN;
use depsmuce::segmentation::{detect, detect_cached, DetectorConfig, Threshold};
use depsmuce::variance::VarianceEstimator;
use depsmuce::{
    block_diff_lrv, brute_force_detect, detect_scaled, penalty, v_stat, NoiseModel, ScaleConfig, Seed, StepSignal,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// criterion 1
const ORACLE_INSTANCES: usize = 1000;
const ORACLE_SSE_TOL: f64 = 1e-9;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(60);
// criterion 2
const NULL_N: usize = 1000;
const NULL_MIN_LEN: usize = 10;
const NULL_REPS: usize = 500;
const NULL_SLACK: f64 = 0.05;
// criteria 3-5
const TABLE_REPS: usize = 250;
const MA1_DEP_CORRECT: f64 = 0.88;
const MA1_SMUCE_OVER: f64 = 0.85;
const MA4_SMUCE_OVER3: f64 = 0.95;
const MA4_DEP_CORRECT: f64 = 0.65;
const ARMA_DEP_CORRECT: f64 = 0.85;
const ARMA_DEP_MSE: f64 = 1.0;
// criterion 6
const RATE_REPS: u64 = 200;
const RATE_RANGE: (f64, f64) = (1.4, 2.8);
// criterion 7
const NEG_SQRT2_TOL: f64 = 1e-12;
const PENALTY_TOL: f64 = 1e-15;
// criterion 8
const EQUIVARIANCE_INSTANCES: usize = 100;
const EQUIVARIANCE_RTOL: f64 = 1e-8;
// criterion 9
const DETECT_TIME_LIMIT: Duration = Duration::from_secs(1);
const SCENARIO_TIME_LIMIT: Duration = Duration::from_secs(30 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_series(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut level = 0.0;
    (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                level = rng.random_range(-3.0..3.0);
            }
            level + rng.random_range(-1.0..1.0)
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = Vec::new();
    for case in 0..ORACLE_INSTANCES {
        let n = rng.random_range(4..=12);
        let y = random_series(&mut rng, n);
        let min_len = rng.random_range(1..=3usize);
        let q = rng.random_range(0.0..=3.0);
        let sigma = rng.random_range(0.3..1.5);
        let cfg = ScaleConfig::new(n, min_len, q, sigma).unwrap();
        let (dp, bf) = (detect_scaled(&y, &cfg).unwrap(), brute_force_detect(&y, &cfg).unwrap());
        if dp.k_hat != bf.k_hat || (dp.sse - bf.sse).abs() > ORACLE_SSE_TOL || dp.breaks() != bf.breaks() {
            mismatches.push(case);
        }
    }
    let took = start.elapsed();
    outcome(
        mismatches.is_empty() && took < ORACLE_TIME_LIMIT,
        format!(
            "{} mismatches of {ORACLE_INSTANCES}, {:.2?} (limit {ORACLE_TIME_LIMIT:?})",
            mismatches.len(),
            took
        ),
    )
}

fn null_level(cache: &mut QuantileCache) -> Outcome {
    let s = Scenario {
        name: "null".into(),
        n: NULL_N,
        truth: StepSignal::constant(0.0),
        noise: NoiseModel::white(1.0),
        alphas: vec![0.1, 0.5],
        variants: vec![Variant::dep_smuce(10, Some(NULL_MIN_LEN))],
        reps: NULL_REPS,
        seed: 11,
        burn_in: DEFAULT_BURN_IN,
        mc_reps: DEFAULT_MC_REPS,
        calibration_seed: DEFAULT_CALIBRATION_SEED,
        histogram_bin: 10,
    };
    let r = run_scenario_cached(&s, cache).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [0.1, 0.5] {
        let c = r.cell("DepSMUCE", a).unwrap();
        let freq = c.proportion_over();
        pass &= c.failed == 0 && freq <= a + NULL_SLACK;
        parts.push(format!(
            "alpha {a}: P(K>0) = {freq:.3} (q {:.4}, limit {:.2})",
            c.q,
            a + NULL_SLACK
        ));
    }
    outcome(pass, parts.join("; "))
}

fn builtin(name: &str) -> Scenario {
    let mut s = builtin_scenarios().into_iter().find(|s| s.name == name).unwrap();
    s.reps = TABLE_REPS;
    s
}

fn cell_line(r: &ScenarioResult, variant: &str, alpha: f64) -> String {
    let c = r.cell(variant, alpha).unwrap();
    let props: Vec<String> = c.kdiff.iter().map(|p| format!("{p:.3}")).collect();
    format!("{}: [{}] mse {:.3}", c.label(), props.join(" "), c.mse)
}

fn table_ma1(r: &ScenarioResult) -> Outcome {
    let dep = r.cell("DepSMUCE", 0.5).unwrap().proportion(0);
    let over = r.cell("SMUCE", 0.5).unwrap().proportion_over();
    outcome(
        dep >= MA1_DEP_CORRECT && over >= MA1_SMUCE_OVER,
        format!(
            "DepSMUCE(0.5) P(K=K*) = {dep:.3} (>= {MA1_DEP_CORRECT}); SMUCE(0.5) P(K>K*) = {over:.3} (>= {MA1_SMUCE_OVER})"
        ),
    )
}

fn table_ma4(r: &ScenarioResult) -> Outcome {
    let smuce: Vec<f64> = [0.1, 0.5, 0.9]
        .iter()
        .map(|&a| r.cell("SMUCE", a).unwrap().proportion(3))
        .collect();
    let dep = r.cell("DepSMUCE", 0.5).unwrap().proportion(0);
    let pass = smuce.iter().all(|&p| p >= MA4_SMUCE_OVER3) && dep >= MA4_DEP_CORRECT;
    outcome(
        pass,
        format!("SMUCE P(K>=K*+3) = {smuce:.3?} (>= {MA4_SMUCE_OVER3}); DepSMUCE(0.5) P(K=K*) = {dep:.3} (>= {MA4_DEP_CORRECT})"),
    )
}

fn table_arma(r: &ScenarioResult) -> Outcome {
    let c = r.cell("DepSMUCE", 0.5).unwrap();
    let dep = c.proportion(0);
    outcome(
        dep >= ARMA_DEP_CORRECT && c.mse <= ARMA_DEP_MSE,
        format!(
            "DepSMUCE(0.5) P(K=K*) = {dep:.3} (>= {ARMA_DEP_CORRECT}); MSE {:.3} (<= {ARMA_DEP_MSE})",
            c.mse
        ),
    )
}

fn rmse_sigma_star(n: usize) -> f64 {
    let noise = NoiseModel::ma(1.0, vec![0.3]);
    let target = noise.oracle_lrv().unwrap().sqrt();
    let taus: Vec<f64> = BENCHMARK_BREAKS.iter().map(|b| (b - 1) as f64 / 1000.0).collect();
    let truth = StepSignal::from_fractions(&taus, vec![0.0, 1.0, 0.0, 2.0, 0.0, -1.0], n).unwrap();
    let base = truth.sample(n).unwrap();
    let mse = (0..RATE_REPS)
        .map(|r| {
            let e = noise
                .generate(n, Seed::new(600 + n as u64, r), DEFAULT_BURN_IN)
                .unwrap();
            let y: Vec<f64> = base.iter().zip(&e).map(|(a, b)| a + b).collect();
            (block_diff_lrv(&y, None).unwrap().sigma_star - target).powi(2)
        })
        .sum::<f64>()
        / RATE_REPS as f64;
    mse.sqrt()
}

fn rate() -> Outcome {
    let (a, b) = (rmse_sigma_star(1000), rmse_sigma_star(8000));
    let ratio = a / b;
    outcome(
        ratio >= RATE_RANGE.0 && ratio <= RATE_RANGE.1,
        format!(
            "RMSE n=1000 {a:.4}, n=8000 {b:.4}, ratio {ratio:.3} (in [{}, {}])",
            RATE_RANGE.0, RATE_RANGE.1
        ),
    )
}

fn unit_values() -> Outcome {
    let mut worst_v: f64 = 0.0;
    for (n, level, min_len) in [(10, 0.0, 1), (50, 3.25, 1), (200, -7.5, 4), (1000, 1.0, 10)] {
        let y = vec![level; n];
        let cfg = ScaleConfig::new(n, min_len, 1.0, 1.0).unwrap();
        let v = v_stat(&y, &StepSignal::constant(level), &cfg).unwrap();
        worst_v = worst_v.max((v + 2f64.sqrt()).abs());
    }
    let mut worst_p: f64 = 0.0;
    for n in [1, 2, 7, 100, 1000, 123_457] {
        worst_p = worst_p.max((penalty(n, n).unwrap() - 2f64.sqrt()).abs());
    }
    outcome(
        worst_v <= NEG_SQRT2_TOL && worst_p <= PENALTY_TOL,
        format!("max |v + sqrt2| = {worst_v:.1e} (<= {NEG_SQRT2_TOL:.0e}); max |pen(n,n) - sqrt2| = {worst_p:.1e} (<= {PENALTY_TOL:.0e})"),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQUIVARIANCE_RTOL * a.abs().max(b.abs()).max(1.0)
}

fn equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for _ in 0..EQUIVARIANCE_INSTANCES {
        let n = rng.random_range(20..300);
        let y = random_series(&mut rng, n);
        let scale = rng.random_range(0.1..10.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let shift = rng.random_range(-100.0..100.0);
        let cfg = DetectorConfig {
            threshold: Threshold::Fixed(rng.random_range(0.0..2.0)),
            min_len: Some(rng.random_range(1..5)),
            variance: VarianceEstimator::BlockDiff { block_length: None },
            ..DetectorConfig::default()
        };
        let z: Vec<f64> = y.iter().map(|v| scale * v + shift).collect();
        let (a, b) = (detect(&y, &cfg).unwrap(), detect(&z, &cfg).unwrap());
        let ok = a.k_hat == b.k_hat
            && a.breaks() == b.breaks()
            && close(b.sigma_used, scale.abs() * a.sigma_used)
            && a.levels()
                .iter()
                .zip(b.levels())
                .all(|(la, lb)| close(*lb, scale * la + shift));
        if !ok {
            bad += 1;
        }
    }
    outcome(
        bad == 0,
        format!("{bad} violations of {EQUIVARIANCE_INSTANCES} (levels to {EQUIVARIANCE_RTOL:.0e} relative)"),
    )
}

fn performance(cache: &mut QuantileCache, scenario_time: Duration) -> Outcome {
    let y = builtin("arma26").replicate_series(0).unwrap();
    let cfg = DetectorConfig {
        min_len: Some(10),
        ..DetectorConfig::with_alpha(0.5)
    };
    // the threshold is already calibrated for (1000, 10) by the null-level run
    let start = Instant::now();
    let fit = detect_cached(&y, &cfg, cache).unwrap();
    let took = start.elapsed();
    outcome(
        took < DETECT_TIME_LIMIT && scenario_time < SCENARIO_TIME_LIMIT,
        format!(
            "detect n=1000 min_len=10: {took:.2?} (K = {}, limit {DETECT_TIME_LIMIT:?}); ma1_03 at {TABLE_REPS} reps x 3 alphas incl. calibration: {scenario_time:.2?} (limit {SCENARIO_TIME_LIMIT:?})",
            fit.k_hat
        ),
    )
}

fn main() -> ExitCode {
    let mut cache = QuantileCache::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, o: Outcome| {
        println!(
            "criterion {id} {name}: {} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o));
    };

    record(1, "oracle equivalence", oracle_equivalence());
    record(2, "null level", null_level(&mut cache));

    let start = Instant::now();
    let ma1 = run_scenario_cached(&builtin("ma1_03"), &mut cache).unwrap();
    let scenario_time = start.elapsed();
    println!(
        "  {}\n  {}",
        cell_line(&ma1, "DepSMUCE", 0.5),
        cell_line(&ma1, "SMUCE", 0.5)
    );
    record(3, "MA(1) table", table_ma1(&ma1));

    let ma4 = run_scenario_cached(&builtin("ma4"), &mut cache).unwrap();
    println!(
        "  {}\n  {}",
        cell_line(&ma4, "DepSMUCE", 0.5),
        cell_line(&ma4, "SMUCE", 0.5)
    );
    record(4, "MA(4) table", table_ma4(&ma4));

    let arma = run_scenario_cached(&builtin("arma26"), &mut cache).unwrap();
    println!(
        "  {}\n  {}",
        cell_line(&arma, "DepSMUCE", 0.5),
        cell_line(&arma, "SMUCE", 0.5)
    );
    record(5, "ARMA(2,6) table", table_arma(&arma));

    record(6, "long-run variance rate", rate());
    record(7, "statistic unit values", unit_values());
    record(8, "equivariance", equivariance());
    record(9, "performance", performance(&mut cache, scenario_time));

    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, _, o)| !o.pass)
        .map(|(id, _, _)| *id)
        .collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
