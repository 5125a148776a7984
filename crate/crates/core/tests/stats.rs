use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rootcause_core::extraction::find_root;
use rootcause_core::linalg::{dot, Matrix};
use rootcause_core::stats::{logistic_fit, mean_sd, ols_residuals, pairwise_measure};

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

fn unit(x: &[f64]) -> Vec<f64> {
    let (m, s) = mean_sd(x);
    x.iter().map(|v| (v - m) / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn residuals_are_orthogonal_to_regressors(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<Vec<f64>> = (0..k).map(|_| uniform(&mut rng, 60)).collect();
        let y = uniform(&mut rng, 60);
        let refs: Vec<&[f64]> = w.iter().map(Vec::as_slice).collect();
        let fit = ols_residuals(&y, &refs).unwrap();
        for col in &w {
            prop_assert!(dot(&fit.residual, col).abs() < 1e-9);
        }
        // y = residual + fitted part
        for r in 0..60 {
            let fitted: f64 = (0..k).map(|c| fit.coefficients[c] * w[c][r]).sum();
            prop_assert!((fit.residual[r] + fitted - y[r]).abs() < 1e-9);
        }
    }
}

#[test]
fn ols_checks_shapes() {
    let y = [1.0, 2.0, 3.0];
    assert!(ols_residuals(&y, &[&[1.0, 2.0]]).is_err());
    assert!(ols_residuals(&y[..1], &[&[1.0]]).is_err());
}

#[test]
fn logistic_fit_recovers_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 50_000;
    let (a, b) = (uniform(&mut rng, n), uniform(&mut rng, n));
    let (w0, w1, c) = (1.5, -2.0, 0.3);
    let target: Vec<u8> = (0..n)
        .map(|r| {
            let p = 1.0 / (1.0 + (-(c + w0 * a[r] + w1 * b[r])).exp());
            u8::from(rng.random::<f64>() < p)
        })
        .collect();
    let fit = logistic_fit(&target, &Matrix::from_columns(vec![a, b]).unwrap()).unwrap();
    assert!(fit.converged && fit.ridge == 0.0);
    assert!(
        (fit.coefficients[0] - w0).abs() < 0.1,
        "{:?}",
        fit.coefficients
    );
    assert!(
        (fit.coefficients[1] - w1).abs() < 0.1,
        "{:?}",
        fit.coefficients
    );
    assert!((fit.intercept - c).abs() < 0.1);
    assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn pairwise_measure_prefers_the_cause() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 20_000;
    let cause = uniform(&mut rng, n);
    let noise = uniform(&mut rng, n);
    let effect: Vec<f64> = cause.iter().zip(&noise).map(|(c, e)| 0.9 * c + e).collect();
    let (x, y) = (unit(&cause), unit(&effect));
    let as_root = pairwise_measure(&x, &y);
    let reversed = pairwise_measure(&y, &x);
    assert!(as_root < reversed, "{as_root} vs {reversed}");
    assert_eq!(find_root(&[&y, &x]), 1);
    assert_eq!(pairwise_measure(&x, &x), 0.0);
}
