//! Distance covariance with a permutation null.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{IndependenceDecision, TIE_WARNING_FRACTION};
use crate::error::{Error, Result};
use crate::rng::{purpose, stream_id, stream_rng};
use crate::stats::taustar::RankedColumn;

/// Largest input accepted; the statistic needs two dense `n x n` matrices.
pub const DCOR_MAX_SAMPLES: usize = 4000;

fn centered_distances(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = Vec::with_capacity(n * n);
    for &a in x {
        d.extend(x.iter().map(|&b| (a - b).abs()));
    }
    let row_means: Vec<f64> = d
        .chunks(n)
        .map(|r| r.iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] += grand - row_means[i] - row_means[j];
        }
    }
    d
}

fn permuted_statistic(a: &[f64], b: &[f64], perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut s = 0.0;
    for i in 0..n {
        let pi = perm[i];
        let row_a = &a[i * n..(i + 1) * n];
        let row_b = &b[pi * n..(pi + 1) * n];
        for j in 0..n {
            s += row_a[j] * row_b[perm[j]];
        }
    }
    s / (n * n) as f64
}

/// Squared sample distance covariance (V-statistic).
pub fn dcor_statistic(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let a = centered_distances(x);
    let b = centered_distances(y);
    let ident: Vec<usize> = (0..x.len()).collect();
    Ok(permuted_statistic(&a, &b, &ident).max(0.0))
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() > DCOR_MAX_SAMPLES {
        return Err(Error::TooLarge {
            what: "distance covariance",
            max: DCOR_MAX_SAMPLES,
            got: x.len(),
        });
    }
    Ok(())
}

/// Permutation test; the p-value is `(1 + #{perm >= observed}) / (1 + B)`.
pub fn dcor_test(
    x: &[f64],
    y: &[f64],
    alpha: f64,
    permutations: usize,
    seed: u64,
) -> Result<IndependenceDecision> {
    check(x, y)?;
    let n = x.len();
    let a = centered_distances(x);
    let b = centered_distances(y);
    let mut perm: Vec<usize> = (0..n).collect();
    let observed = permuted_statistic(&a, &b, &perm);
    let mut rng = stream_rng(seed, stream_id(purpose::PERMUTATION, &[n as u64]));
    let mut exceed = 0usize;
    for _ in 0..permutations {
        perm.shuffle(&mut rng);
        if permuted_statistic(&a, &b, &perm) >= observed {
            exceed += 1;
        }
    }
    let p_value = (1 + exceed) as f64 / (1 + permutations) as f64;
    let ties = |v: &[f64]| RankedColumn::new(v).tie_fraction() > TIE_WARNING_FRACTION;
    Ok(IndependenceDecision {
        statistic: observed.max(0.0),
        p_value,
        independent: p_value > alpha,
        tie_warning: ties(x) || ties(y),
    })
}
