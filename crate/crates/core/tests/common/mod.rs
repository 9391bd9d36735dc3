//! Independent oracles and synthetic data shared by the integration tests.
//!
//! Nothing here calls into the code paths it is used to check: Kendall τ
//! is counted pair by pair, GP posteriors are solved with nalgebra's LU,
//! and weight optima come from exhaustive grids.

#![allow(dead_code)]

use metricfuse::calibration::objective_tau;
use metricfuse::{MetricSpec, ScoreMatrix, SegmentRecord};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// O(n²) τ-b by direct enumeration of every pair. `None` when either
/// vector is constant.
pub fn kendall_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    let (a, b) = (c + d + tx, c + d + ty);
    if a == 0 || b == 0 {
        return None;
    }
    Some((c as f64 - d as f64) / ((b as f64) * (a as f64)).sqrt())
}

fn matern_oracle(a: &[f64], b: &[f64], length_scale: f64, variance: f64) -> f64 {
    let r = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let z = r / length_scale;
    variance * (1.0 + 5f64.sqrt() * z + 5.0 * z * z / 3.0) * (-(5f64.sqrt()) * z).exp()
}

/// Dense GP posterior via an LU solve of the full Gram matrix.
pub fn posterior_oracle(
    xs: &[Vec<f64>],
    ys: &[f64],
    length_scale: f64,
    variance: f64,
    diagonal: f64,
    query: &[f64],
) -> (f64, f64) {
    let n = xs.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        matern_oracle(&xs[i], &xs[j], length_scale, variance) + if i == j { diagonal } else { 0.0 }
    });
    let mean = ys.iter().sum::<f64>() / n as f64;
    let centered = DVector::from_iterator(n, ys.iter().map(|y| y - mean));
    let ks = DVector::from_iterator(n, xs.iter().map(|x| matern_oracle(x, query, length_scale, variance)));
    let lu = k.lu();
    let alpha = lu.solve(&centered).expect("oracle solve");
    let v = lu.solve(&ks).expect("oracle solve");
    (mean + ks.dot(&alpha), (variance - ks.dot(&v)).max(0.0))
}

/// Best τ over the weight cube on a grid of `steps + 1` values per axis.
pub fn grid_oracle(matrix: &ScoreMatrix, gold: &[f64], steps: usize) -> (Vec<f64>, f64) {
    let dim = matrix.dimension();
    let mut best = (vec![0.0; dim], f64::NEG_INFINITY);
    let mut idx = vec![0usize; dim];
    loop {
        let w: Vec<f64> = idx.iter().map(|&i| i as f64 / steps as f64).collect();
        if let Ok(t) = objective_tau(&w, matrix, gold) {
            if t > best.1 {
                best = (w, t);
            }
        }
        let mut d = 0;
        loop {
            if d == dim {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

pub fn spec(name: &str, lo: f64, hi: f64, invert: bool, needs_ref: bool) -> MetricSpec {
    MetricSpec::new(name, lo, hi, invert, needs_ref).unwrap()
}

/// Gold is a noisy monotone transform of `signal`; `noise` is independent
/// of everything; `signal_inv` carries the same information as `signal` on
/// an inverted 0–25 scale.
pub fn fusion_dataset(n: usize, seed: u64) -> (Vec<SegmentRecord>, Vec<MetricSpec>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 0.15).unwrap();
    let records = (0..n)
        .map(|i| {
            let q: f64 = rng.random();
            let gold = (2.0 * q).exp() + jitter.sample(&mut rng);
            let noise: f64 = rng.random();
            SegmentRecord::new("en-de", format!("sys{}", i % 7), i.to_string())
                .with_human_score(gold)
                .with_score("signal", q)
                .with_score("noise", noise)
                .with_score("signal_inv", 25.0 * (1.0 - q))
        })
        .collect();
    let specs = vec![
        spec("signal", 0.0, 1.0, false, true),
        spec("noise", 0.0, 1.0, false, true),
        spec("signal_inv", 0.0, 25.0, true, true),
    ];
    (records, specs)
}

/// Two language pairs: gold follows `m1` on `pair_a` and `m2` on `pair_b`.
pub fn two_pair_dataset(
    n_per_pair: usize,
    seed: u64,
    pair_a: &str,
    pair_b: &str,
) -> (Vec<SegmentRecord>, Vec<MetricSpec>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 0.05).unwrap();
    let mut records = Vec::new();
    for (pair, follows_first) in [(pair_a, true), (pair_b, false)] {
        for i in 0..n_per_pair {
            let m1: f64 = rng.random();
            let m2: f64 = rng.random();
            let base = if follows_first { m1 } else { m2 };
            records.push(
                SegmentRecord::new(pair, "sys", format!("{pair}-{i}"))
                    .with_human_score(base + jitter.sample(&mut rng))
                    .with_score("m1", m1)
                    .with_score("m2", m2)
                    .with_reference(i % 3 != 0)
                    .with_score("qe", 0.5 * m1 + 0.5 * m2),
            );
        }
    }
    let specs = vec![spec("m1", 0.0, 1.0, false, true), spec("m2", 0.0, 1.0, false, true)];
    (records, specs)
}

pub fn gold(records: &[SegmentRecord]) -> Vec<f64> {
    records.iter().map(|r| r.human_score.unwrap()).collect()
}
