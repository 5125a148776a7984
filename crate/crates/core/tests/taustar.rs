use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rootcause_core::stats::taustar::limiting_upper_tail;
use rootcause_core::stats::{
    independence_test, taustar_statistic, IndependenceBackend, RankedColumn,
};

fn a(z1: f64, z2: f64, z3: f64, z4: f64) -> f64 {
    let s = (z1 - z2).abs() + (z3 - z4).abs() - (z1 - z3).abs() - (z2 - z4).abs();
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn integer_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| v.iter().filter(|b| *b < a).count() as f64)
        .collect()
}

/// U-statistic over all ordered 4-tuples of distinct indices.
///
/// Evaluated on integer ranks: the kernel compares sums of distances that
/// coincide exactly for some orderings, and rounding on raw floats would turn
/// those zeros into spurious signs.
fn brute_force(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (x, y) = (integer_ranks(x), integer_ranks(y));
    let mut sum = 0.0;
    let mut count = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if i == j || i == k || i == l || j == k || j == l || k == l {
                        continue;
                    }
                    sum += a(x[i], x[j], x[k], x[l]) * a(y[i], y[j], y[k], y[l]);
                    count += 1.0;
                }
            }
        }
    }
    sum / count
}

fn fast(x: &[f64], y: &[f64]) -> f64 {
    taustar_statistic(&RankedColumn::new(x), &RankedColumn::new(y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force(seed in any::<u64>(), n in 4usize..13) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // distinct values so the brute force sees no ties
        let x: Vec<f64> = (0..n).map(|i| rng.random::<f64>() + i as f64 * 1e-9).collect();
        let y: Vec<f64> = (0..n).map(|i| rng.random::<f64>() + i as f64 * 1e-9).collect();
        prop_assert!((fast(&x, &y) - brute_force(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn invariant_to_monotone_transforms(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..150).map(|_| rng.random::<f64>() - 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + 0.2 * rng.random::<f64>()).collect();
        let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ty: Vec<f64> = y.iter().map(|v| v * v * v + 3.0).collect();
        let d1 = independence_test(&x, &y, 0.05, IndependenceBackend::TauStar).unwrap();
        let d2 = independence_test(&tx, &ty, 0.05, IndependenceBackend::TauStar).unwrap();
        prop_assert_eq!(d1, d2);
    }
}

#[test]
fn monotone_pairs_hit_the_maximum() {
    let x: Vec<f64> = (0..30).map(f64::from).collect();
    let up = fast(&x, &x);
    let down: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!((up - 2.0 / 3.0).abs() < 1e-12);
    assert!((fast(&x, &down) - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn limiting_law_matches_simulation() {
    // simulate Q = sum lambda_ij Z^2 with a generous truncation
    let c = 36.0 / std::f64::consts::PI.powi(4);
    let lambdas: Vec<f64> = (1..=60)
        .flat_map(|i| (1..=60).map(move |j| c / ((i * i * j * j) as f64)))
        .collect();
    let rest = 1.0 - lambdas.iter().sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 20_000;
    let qs: Vec<f64> = (0..draws)
        .map(|_| {
            lambdas
                .iter()
                .map(|l| {
                    let z: f64 =
                        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                    l * z * z
                })
                .sum::<f64>()
                + rest
        })
        .collect();
    for x in [0.3, 0.6, 1.0, 1.5, 2.5, 4.0] {
        let empirical = qs.iter().filter(|&&q| q > x).count() as f64 / draws as f64;
        let se = (empirical * (1.0 - empirical) / draws as f64)
            .sqrt()
            .max(1e-3);
        let p = limiting_upper_tail(x);
        assert!(
            (p - empirical).abs() < 4.0 * se,
            "x = {x}: inverted {p}, simulated {empirical}"
        );
    }
}

#[test]
fn null_rejection_rate_is_calibrated() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 500;
    let mut rejections = 0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..1000)
            .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        let y: Vec<f64> = (0..1000)
            .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
            .collect();
        let d = independence_test(&x, &y, 0.05, IndependenceBackend::TauStar).unwrap();
        if !d.independent {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    assert!((0.02..=0.09).contains(&rate), "rejection rate {rate}");
}

#[test]
fn detects_quadratic_dependence() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let trials = 40;
    let mut detected = 0;
    for _ in 0..trials {
        let x: Vec<f64> = (0..10_000)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let e: f64 =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                v * v + 0.1 * e
            })
            .collect();
        let d = independence_test(&x, &y, 0.05, IndependenceBackend::TauStar).unwrap();
        if !d.independent {
            detected += 1;
        }
    }
    assert!(detected as f64 / trials as f64 >= 0.95);
}

#[test]
fn distance_backend_agrees_on_easy_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let x: Vec<f64> = (0..300).map(|_| rng.random::<f64>() - 0.5).collect();
    let y: Vec<f64> = x.iter().map(|v| v * v).collect();
    let z: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
    let backend = IndependenceBackend::DistanceCorrelation {
        permutations: 199,
        seed: 1,
    };
    assert!(
        !independence_test(&x, &y, 0.05, backend)
            .unwrap()
            .independent
    );
    let same = independence_test(&x, &y, 0.05, backend).unwrap();
    assert_eq!(same, independence_test(&x, &y, 0.05, backend).unwrap());
    let d = independence_test(&x, &z, 0.05, backend).unwrap();
    assert!(d.p_value > 0.01);
}

#[test]
fn perfect_dependence() {
    let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin()).collect();
    let d = independence_test(&x, &x, 0.05, IndependenceBackend::TauStar).unwrap();
    assert!(!d.independent && d.p_value < 1e-6);
}

#[test]
fn heavy_ties_raise_a_warning() {
    let x: Vec<f64> = (0..200).map(|i| (i % 3) as f64).collect();
    let y: Vec<f64> = (0..200).map(|i| (i as f64 * 0.77).sin()).collect();
    let d = independence_test(&x, &y, 0.05, IndependenceBackend::TauStar).unwrap();
    assert!(d.tie_warning);
}
