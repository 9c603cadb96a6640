//! Parameter initialization.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

/// Fills a row-major `rows x cols` matrix with a (semi-)orthogonal matrix
/// scaled by `gain`: orthonormal columns when `rows >= cols`, orthonormal rows
/// otherwise. Gram-Schmidt on a Gaussian sample, done in f64.
pub fn orthogonal<F: Real, R: Rng + ?Sized>(w: &mut [F], rows: usize, cols: usize, gain: f64, rng: &mut R) {
    assert_eq!(w.len(), rows * cols);
    let (count, len) = if rows >= cols { (cols, rows) } else { (rows, cols) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= d * qi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    for r in 0..rows {
        for c in 0..cols {
            let x = if rows >= cols { basis[c][r] } else { basis[r][c] };
            w[r * cols + c] = F::of(gain * x);
        }
    }
}

/// He/Kaiming uniform for ReLU networks: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
pub fn kaiming_uniform<F: Real, R: Rng + ?Sized>(w: &mut [F], fan_in: usize, rng: &mut R) {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    for x in w.iter_mut() {
        *x = F::of(rng.random_range(-bound..bound));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram(w: &[f64], rows: usize, cols: usize, by_cols: bool) -> Vec<f64> {
        let n = if by_cols { cols } else { rows };
        let at = |r: usize, c: usize| w[r * cols + c];
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = if by_cols {
                    (0..rows).map(|r| at(r, i) * at(r, j)).sum()
                } else {
                    (0..cols).map(|c| at(i, c) * at(j, c)).sum()
                };
            }
        }
        g
    }

    #[test]
    fn orthogonal_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (rows, cols) in [(8, 3), (3, 8), (6, 6)] {
            let mut w = vec![0f64; rows * cols];
            orthogonal(&mut w, rows, cols, 1.0, &mut rng);
            let n = rows.min(cols);
            let g = gram(&w, rows, cols, rows >= cols);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g[i * n + j] - want).abs() < 1e-12);
                }
            }
        }
    }
}
