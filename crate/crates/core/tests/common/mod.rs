#![allow(dead_code)]

use mcsentinel::samplers::{Ar1Sampler, Ar1Spec};
use mcsentinel::source::collect_rows;
use rayon::prelude::*;

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs `f(rep)` for `reps` replications in parallel.
pub fn replicate<T: Send>(reps: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..reps).into_par_iter().map(f).collect()
}

pub fn ar1_rows(rho: f64, dim: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut s = Ar1Sampler::new(Ar1Spec::new(rho, dim, seed)).unwrap();
    collect_rows(&mut s, n).unwrap()
}

/// Two-pass mean and (n - 1)-divisor variance: the reference the streaming
/// accumulators are checked against.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// From-scratch non-overlapping batch means with a given batch size, written
/// independently of the library.
pub fn naive_bm(series: &[f64], b: usize) -> f64 {
    let a = series.len() / b;
    let means: Vec<f64> = (0..a)
        .map(|j| series[j * b..(j + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / a as f64;
    b as f64 * means.iter().map(|y| (y - grand).powi(2)).sum::<f64>() / (a - 1) as f64
}

pub fn column(rows: &[f64], dim: usize, j: usize) -> Vec<f64> {
    rows.iter().skip(j).step_by(dim).copied().collect()
}

pub fn lag_autocorrelation(x: &[f64], k: usize) -> f64 {
    let (mean, _) = two_pass(x);
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let ck: f64 = (0..x.len() - k)
        .map(|t| (x[t] - mean) * (x[t + k] - mean))
        .sum();
    ck / c0
}
