#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect()
}

/// `|a - n| / max(|a|, |n|, floor)`
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central differences of `loss` at `x` for the listed coordinates, compared
/// against `analytic`. Returns the worst relative error.
pub fn fd_check(x: &[f64], analytic: &[f64], coords: &[usize], loss: impl Fn(&[f64]) -> f64) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut p = x.to_vec();
    for &i in coords {
        let orig = p[i];
        p[i] = orig + h;
        let up = loss(&p);
        p[i] = orig - h;
        let down = loss(&p);
        p[i] = orig;
        let num = (up - down) / (2.0 * h);
        let e = rel_err(analytic[i], num);
        if e > worst {
            worst = e;
        }
    }
    worst
}

pub fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub fn sample_coords(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return all(n);
    }
    (0..k).map(|_| rng.random_range(0..n)).collect()
}

pub fn weighted_sum(y: &[f64], w: &[f64]) -> f64 {
    y.iter().zip(w).map(|(a, b)| a * b).sum()
}
