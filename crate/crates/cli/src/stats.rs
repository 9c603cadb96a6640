//! Welch's unequal-variance t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Welch {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsufficientSeeds {
    pub a: usize,
    pub b: usize,
}

impl std::fmt::Display for InsufficientSeeds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "need at least 2 seeds per group, got {} and {}", self.a, self.b)
    }
}

impl std::error::Error for InsufficientSeeds {}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `t` is positive when `a` has the larger mean. Two groups without any
/// spread give `t = 0, p = 1` for equal means and `p = 0` otherwise.
pub fn welch(a: &[f64], b: &[f64]) -> Result<Welch, InsufficientSeeds> {
    if a.len() < 2 || b.len() < 2 {
        return Err(InsufficientSeeds { a: a.len(), b: b.len() });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (variance(a) / na, variance(b) / nb);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let same = ma == mb;
        return Ok(Welch {
            t: if same { 0.0 } else { (ma - mb).signum() * f64::INFINITY },
            df: na + nb - 2.0,
            p: if same { 1.0 } else { 0.0 },
            mean_a: ma,
            mean_b: mb,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(Welch {
        t,
        df,
        p,
        mean_a: ma,
        mean_b: mb,
    })
}
