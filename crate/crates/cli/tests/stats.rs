mod common;

use common::tdist::{direct, p_oracle};
use navgym_cli::stats::{median, welch};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn pdf_oracle_is_normalized() {
    for nu in [1.5, 3.0, 10.0, 40.0] {
        // total mass over a wide interval, the tail beyond it is tiny for these df
        let p = p_oracle(2000.0, nu);
        assert!(p.abs() < 2e-3, "nu {nu}: {p}");
    }
    assert!((p_oracle(1.959_963_984_540_054, 1e7) - 0.05).abs() < 1e-6);
}

#[test]
fn identical_groups() {
    let w = welch(&[3.0, 3.0, 3.0], &[3.0, 3.0, 3.0]).unwrap();
    assert_eq!((w.t, w.p), (0.0, 1.0));
    let w = welch(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
    assert_eq!(w.t, 0.0);
    assert!((w.p - 1.0).abs() < 1e-15);
}

#[test]
fn extreme_separation() {
    let e = 1e-9;
    let w = welch(&[1.0, 1.0 + e, 1.0 - e], &[2.0, 2.0 - e, 2.0 + e]).unwrap();
    assert!(w.t < -1e6);
    assert!(w.p < 1e-3);
    let flat = welch(&[1.0, 1.0], &[2.0, 2.0, 2.0]).unwrap();
    assert_eq!(flat.p, 0.0);
}

#[test]
fn fewer_than_two_seeds_is_an_error() {
    assert!(welch(&[1.0], &[1.0, 2.0]).is_err());
    assert!(welch(&[1.0, 2.0], &[]).is_err());
}

#[test]
fn matches_integrated_t_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let draw = |rng: &mut ChaCha8Rng| {
            let n = rng.random_range(2..12);
            let mu = rng.random_range(-1.5..1.5);
            let sd = rng.random_range(0.3..3.0);
            let d = Normal::new(mu, sd).unwrap();
            (0..n).map(|_| d.sample(rng)).collect::<Vec<f64>>()
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let w = welch(&a, &b).unwrap();
        let (t, df) = direct(&a, &b);
        assert!((w.t - t).abs() <= 1e-12 * t.abs().max(1.0));
        assert!((w.df - df).abs() <= 1e-12 * df);
        let err = (w.p - p_oracle(t, df)).abs();
        worst = worst.max(err);
        assert!(err < 1e-6, "t {t} df {df}: {} vs {}", w.p, p_oracle(t, df));
    }
    assert!(worst < 1e-6);
}

#[test]
fn median_of_even_and_odd() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
}

fn group() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, 2..10)
}

proptest! {
    #[test]
    fn p_is_a_probability_and_symmetric(a in group(), b in group()) {
        let w = welch(&a, &b).unwrap();
        let r = welch(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&w.p));
        prop_assert_eq!(w.p, r.p);
        prop_assert_eq!(w.t, -r.t);
    }

    #[test]
    fn invariant_under_shared_affine_maps(a in group(), b in group(), s in 0.1..10.0f64, c in -50.0..50.0f64) {
        let w = welch(&a, &b).unwrap();
        let f = |x: &Vec<f64>| x.iter().map(|v| s * v + c).collect::<Vec<_>>();
        let m = welch(&f(&a), &f(&b)).unwrap();
        prop_assume!(w.t.is_finite());
        prop_assert!((w.t - m.t).abs() <= 1e-6 * w.t.abs().max(1.0));
        prop_assert!((w.p - m.p).abs() <= 1e-6);
    }
}
