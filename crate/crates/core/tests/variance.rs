// SPDX-License-Identifier: MIT OR Apache-2.0

use depsmuce::experiments::BENCHMARK_BREAKS;
use depsmuce::variance::default_block_length;
use depsmuce::{block_diff_lrv, NoiseModel, Seed, StepSignal};

const LEVELS: [f64; 6] = [0.0, 1.0, 0.0, 2.0, 0.0, -1.0];

fn truth() -> StepSignal {
    StepSignal::new(BENCHMARK_BREAKS.to_vec(), LEVELS.to_vec()).unwrap()
}

fn truth_at(n: usize) -> StepSignal {
    let taus: Vec<f64> = BENCHMARK_BREAKS.iter().map(|b| (b - 1) as f64 / 1000.0).collect();
    StepSignal::from_fractions(&taus, LEVELS.to_vec(), n).unwrap()
}

fn series(signal: &StepSignal, noise: &NoiseModel, n: usize, seed: Seed) -> Vec<f64> {
    let mut y = signal.sample(n).unwrap();
    for (v, e) in y.iter_mut().zip(noise.generate(n, seed, 1000).unwrap()) {
        *v += e;
    }
    y
}

/// Contribution of the jumps to the expected block estimate, from the
/// noiseless block means alone.
fn jump_bias(signal: &StepSignal, n: usize, k: usize) -> f64 {
    block_diff_lrv(&signal.sample(n).unwrap(), Some(k))
        .unwrap()
        .sigma_star_sq
}

#[test]
fn jump_bias_is_additive_on_white_noise() {
    let n = 1000;
    let k = default_block_length(n).unwrap();
    let noise = NoiseModel::white(1.0);
    let oracle = noise.oracle_lrv().unwrap();
    let bias = jump_bias(&truth(), n, k);
    // breaks sit on block boundaries for k = 10: bias = k * sum d^2 / (2 (m - 1))
    assert!((bias - 10.0 * 11.0 / 198.0).abs() < 1e-12);

    let reps = 500;
    let mean = (0..reps)
        .map(|r| {
            block_diff_lrv(&series(&truth(), &noise, n, Seed::new(77, r)), None)
                .unwrap()
                .sigma_star_sq
        })
        .sum::<f64>()
        / reps as f64;
    let expected = oracle + bias;
    assert!(
        ((mean - expected) / expected).abs() < 0.10,
        "mean {mean}, expected {expected}"
    );
    // without the jumps the estimate is unbiased
    let flat = StepSignal::constant(0.0);
    let mean0 = (0..reps)
        .map(|r| {
            block_diff_lrv(&series(&flat, &noise, n, Seed::new(78, r)), None)
                .unwrap()
                .sigma_star_sq
        })
        .sum::<f64>()
        / reps as f64;
    assert!(((mean0 - oracle) / oracle).abs() < 0.10, "mean {mean0}");
}

#[test]
fn jump_bias_shrinks_with_n() {
    let mut prev = f64::INFINITY;
    for n in [1000, 8000, 64_000, 512_000] {
        let k = default_block_length(n).unwrap();
        let b = jump_bias(&truth_at(n), n, k);
        assert!(b < prev, "n={n}: {b} >= {prev}");
        assert!(b <= 11.0 * (k * k) as f64 / n as f64 + 1e-12);
        prev = b;
    }
    assert!(prev < 0.1);
}

fn rmse(n: usize, reps: u64) -> f64 {
    let noise = NoiseModel::ma(1.0, vec![0.3]);
    let target = noise.oracle_lrv().unwrap().sqrt();
    let signal = truth_at(n);
    let mse = (0..reps)
        .map(|r| {
            let s = block_diff_lrv(&series(&signal, &noise, n, Seed::new(n as u64, r)), None)
                .unwrap()
                .sigma_star;
            (s - target).powi(2)
        })
        .sum::<f64>()
        / reps as f64;
    mse.sqrt()
}

#[test]
fn rmse_rate() {
    let ratio = rmse(1000, 200) / rmse(8000, 200);
    assert!((1.4..=2.8).contains(&ratio), "ratio {ratio}");
}
