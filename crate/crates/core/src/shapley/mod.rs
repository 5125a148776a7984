//! Shapley attribution of the diagnosis log-odds to the inducing terms.
//!
//! With a logistic model `logit P(D = 1 | E*) = E* delta + c`, the Shapley
//! value of `E_i*` only involves the conditioning sets drawn from its
//! dependence-graph neighborhood `B_i*`:
//!
//! `S_i* = E_i* delta_i - (delta_i / q) * sum_{V in B_i* \ {i}} psi_|V| E(E_i* | V)`
//!
//! with `psi_k = q / (C(|B_i*| - 1, k) |B_i*|)`. Small neighborhoods use this
//! sum directly; large ones fall back to a Monte Carlo estimate.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{neighborhoods, UndirectedGraph};
use crate::linalg::Matrix;
use crate::rng::{purpose, stream_id, stream_rng};
use crate::stats::{logistic_fit, LogisticFit};

pub mod estimator;

pub use estimator::{CondExpEstimator, EstimatorKind, Knn, Linear};

/// Largest neighborhood handled by the closed form unless configured otherwise.
pub const DEFAULT_MC_THRESHOLD: usize = 10;
pub const DEFAULT_MC_SAMPLES: usize = 10_000;
/// Largest `q` accepted by [`psi_weights`].
pub const MAX_PSI_Q: usize = 64;
/// Largest `q` accepted by [`shapley_bruteforce`].
pub const MAX_BRUTEFORCE_Q: usize = 12;
/// The closed form enumerates `2^(|B_i*| - 1)` subsets; beyond this it refuses.
pub const MAX_EXACT_NEIGHBORHOOD: usize = 24;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for j in 0..k {
        // exact at every step: c * (n - j) is divisible by (j + 1)
        c = c * (n - j) as u128 / (j + 1) as u128;
    }
    c
}

fn check_psi_args(q: usize, b: usize) -> Result<()> {
    if b == 0 || b > q {
        return Err(Error::InvalidArgument(alloc::format!(
            "neighborhood size {b} must lie in 1..={q}"
        )));
    }
    if q > MAX_PSI_Q {
        return Err(Error::TooLarge {
            what: "psi weights",
            max: MAX_PSI_Q,
            got: q,
        });
    }
    Ok(())
}

/// `psi_0 .. psi_{b-1}` as exact fractions.
pub fn psi_weights_exact(q: usize, b: usize) -> Result<Vec<Ratio<u128>>> {
    check_psi_args(q, b)?;
    Ok((0..b)
        .map(|k| Ratio::new(q as u128, binomial(b - 1, k) * b as u128))
        .collect())
}

/// `psi_0 .. psi_{b-1}` for `q` variables and a neighborhood of size `b`.
pub fn psi_weights(q: usize, b: usize) -> Result<Vec<f64>> {
    Ok(psi_weights_exact(q, b)?
        .iter()
        .map(|r| *r.numer() as f64 / *r.denom() as f64)
        .collect())
}

/// `psi_k / q = 1 / (C(b - 1, k) b)`, the weight each size-`k` set gets.
fn subset_weights(b: usize) -> Vec<f64> {
    (0..b)
        .map(|k| 1.0 / (binomial(b - 1, k) as f64 * b as f64))
        .collect()
}

/// Memoized conditional means `E(E_i* | E_V*)`.
///
/// Each entry is fit once on the training rows and evaluated at every query
/// row, so the subset sums for all samples share it. Training and query rows
/// coincide for attribution on extracted terms; ground truth trains on fresh
/// oracle draws instead.
#[derive(Debug)]
pub struct ConditionalMeans<'a, E: ?Sized> {
    train: &'a Matrix,
    queries: &'a Matrix,
    estimator: &'a E,
    /// Use 0 for the unconditional mean instead of the training mean.
    centered: bool,
    cache: BTreeMap<(usize, Vec<usize>), Vec<f64>>,
}

impl<'a, E: CondExpEstimator + ?Sized> ConditionalMeans<'a, E> {
    pub fn new(train: &'a Matrix, queries: &'a Matrix, estimator: &'a E) -> Result<Self> {
        if train.ncols() != queries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: train.ncols(),
                got: queries.ncols(),
            });
        }
        if train.nrows() == 0 {
            return Err(Error::TooFewSamples { min: 1, got: 0 });
        }
        Ok(ConditionalMeans {
            train,
            queries,
            estimator,
            centered: false,
            cache: BTreeMap::new(),
        })
    }

    /// Treats the terms as known to have mean zero.
    pub fn centered(mut self) -> Self {
        self.centered = true;
        self
    }

    pub fn queries(&self) -> &Matrix {
        self.queries
    }

    pub fn ncols(&self) -> usize {
        self.queries.ncols()
    }

    /// Number of fitted `(i, V)` entries so far.
    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    /// `E(E_i* | V)` at every query row. `v` must be sorted and exclude `i`.
    pub fn get(&mut self, i: usize, v: &[usize]) -> &[f64] {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]) && !v.contains(&i));
        let ConditionalMeans {
            train,
            queries,
            estimator,
            centered,
            cache,
        } = self;
        cache.entry((i, v.to_vec())).or_insert_with(|| {
            let n = queries.nrows();
            if v.is_empty() && *centered {
                return vec![0.0; n];
            }
            let feats: Vec<&[f64]> = v.iter().map(|&c| train.col(c)).collect();
            let qs: Vec<&[f64]> = v.iter().map(|&c| queries.col(c)).collect();
            estimator.fit_predict(train.col(i), &feats, &qs, n)
        })
    }
}

/// Elements of `items` picked by the bits of `mask`.
fn subset(items: &[usize], mask: u64) -> Vec<usize> {
    items
        .iter()
        .enumerate()
        .filter(|(b, _)| mask >> b & 1 == 1)
        .map(|(_, &x)| x)
        .collect()
}

fn check_neighborhood(neighborhood: &[usize], i: usize) -> Result<Vec<usize>> {
    if !neighborhood.contains(&i) {
        return Err(Error::InvalidArgument(alloc::format!(
            "neighborhood of {i} must contain {i}"
        )));
    }
    Ok(neighborhood.iter().copied().filter(|&j| j != i).collect())
}

/// Closed-form `S_i*` at every query row.
pub fn exact_column<E: CondExpEstimator + ?Sized>(
    means: &mut ConditionalMeans<'_, E>,
    i: usize,
    delta_i: f64,
    neighborhood: &[usize],
) -> Result<Vec<f64>> {
    let others = check_neighborhood(neighborhood, i)?;
    if neighborhood.len() > MAX_EXACT_NEIGHBORHOOD {
        return Err(Error::TooLarge {
            what: "closed-form neighborhood",
            max: MAX_EXACT_NEIGHBORHOOD,
            got: neighborhood.len(),
        });
    }
    let weights = subset_weights(neighborhood.len());
    let mut acc = vec![0.0; means.queries().nrows()];
    for mask in 0..1u64 << others.len() {
        let v = subset(&others, mask);
        let w = weights[v.len()];
        for (a, m) in acc.iter_mut().zip(means.get(i, &v)) {
            *a += w * m;
        }
    }
    let e = means.queries().col(i);
    Ok(e.iter()
        .zip(&acc)
        .map(|(e, a)| e * delta_i - delta_i * a)
        .collect())
}

/// Closed-form Shapley values of one query row, every variable.
///
/// Fails when some neighborhood exceeds `threshold`; such variables belong
/// to [`shapley_monte_carlo`].
pub fn shapley_exact<E: CondExpEstimator + ?Sized>(
    means: &mut ConditionalMeans<'_, E>,
    row: usize,
    delta: &[f64],
    dep_graph: &UndirectedGraph,
    threshold: usize,
) -> Result<Vec<f64>> {
    let q = means.ncols();
    check_shapes(q, delta, dep_graph)?;
    (0..q)
        .map(|i| {
            let nb = neighborhoods(dep_graph, i);
            if nb.len() > threshold {
                return Err(Error::TooLarge {
                    what: "neighborhood for the closed form",
                    max: threshold,
                    got: nb.len(),
                });
            }
            let others = check_neighborhood(&nb, i)?;
            let weights = subset_weights(nb.len());
            let mut acc = 0.0;
            for mask in 0..1u64 << others.len() {
                let v = subset(&others, mask);
                acc += weights[v.len()] * means.get(i, &v)[row];
            }
            Ok(means.queries().get(row, i) * delta[i] - delta[i] * acc)
        })
        .collect()
}

/// Monte Carlo estimate of `S_i*` at one query row.
///
/// Draws `K` uniformly from `0..|B_i*|`, then `V` uniformly among the
/// size-`K` subsets of `B_i* \ {i}`, and averages
/// `E_i* delta_i - E(E_i* | V) delta_i`. The stream is fixed by `seed`, `row`
/// and `i`.
pub fn shapley_monte_carlo<E: CondExpEstimator + ?Sized>(
    means: &mut ConditionalMeans<'_, E>,
    row: usize,
    delta_i: f64,
    i: usize,
    neighborhood: &[usize],
    num_samples: usize,
    seed: u64,
) -> Result<f64> {
    if num_samples == 0 {
        return Err(Error::InvalidArgument(
            "num_samples must be positive".into(),
        ));
    }
    let others = check_neighborhood(neighborhood, i)?;
    let mut rng = stream_rng(
        seed,
        stream_id(purpose::MONTE_CARLO, &[row as u64, i as u64]),
    );
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for _ in 0..num_samples {
        let k = rng.random_range(0..neighborhood.len());
        let mut v: Vec<usize> = sample_indices(&mut rng, others.len(), k)
            .into_iter()
            .map(|b| others[b])
            .collect();
        v.sort_unstable();
        *counts.entry(v).or_insert(0) += 1;
    }
    let mut acc = 0.0;
    for (v, c) in &counts {
        acc += (*c as f64 / num_samples as f64) * means.get(i, v)[row];
    }
    Ok(means.queries().get(row, i) * delta_i - delta_i * acc)
}

/// Shapley value of `E_i*` at one query row from the defining average over
/// every coalition `W` of the other `q - 1` terms, with value
/// `E_i* delta_i - E(E_i* | B_i* ∩ W) delta_i` for each.
pub fn shapley_bruteforce<E: CondExpEstimator + ?Sized>(
    means: &mut ConditionalMeans<'_, E>,
    row: usize,
    delta_i: f64,
    i: usize,
    neighborhood: &[usize],
) -> Result<f64> {
    let q = means.ncols();
    if q > MAX_BRUTEFORCE_Q {
        return Err(Error::TooLarge {
            what: "brute-force Shapley sum",
            max: MAX_BRUTEFORCE_Q,
            got: q,
        });
    }
    let others = check_neighborhood(neighborhood, i)?;
    let rest: Vec<usize> = (0..q).filter(|&j| j != i).collect();
    let e = means.queries().get(row, i);
    let mut total = 0.0;
    for mask in 0..1u64 << rest.len() {
        let w = subset(&rest, mask);
        let v: Vec<usize> = w.iter().copied().filter(|j| others.contains(j)).collect();
        let weight = 1.0 / (q as f64 * binomial(q - 1, w.len()) as f64);
        total += weight * (e * delta_i - means.get(i, &v)[row] * delta_i);
    }
    Ok(total)
}

/// How a variable's values were computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::MonteCarlo => "monte_carlo",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "closed_form" => Some(Method::ClosedForm),
            "monte_carlo" => Some(Method::MonteCarlo),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributionConfig {
    /// Neighborhoods larger than this use Monte Carlo.
    pub mc_threshold: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig {
            mc_threshold: DEFAULT_MC_THRESHOLD,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
            estimator: EstimatorKind::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyReport {
    /// `n x q`.
    pub values: Matrix,
    pub delta: LogisticFit,
    /// `B_i*` for each variable, ascending.
    pub neighborhoods: Vec<Vec<usize>>,
    pub method_per_var: Vec<Method>,
    /// Per sample, variable indices by decreasing value.
    pub rankings: Vec<Vec<usize>>,
    /// Per sample, which values are strictly positive.
    pub root_cause_mask: Vec<Vec<bool>>,
    pub config: AttributionConfig,
}

fn check_shapes(q: usize, delta: &[f64], dep_graph: &UndirectedGraph) -> Result<()> {
    if delta.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: delta.len(),
        });
    }
    if dep_graph.vertex_count() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: dep_graph.vertex_count(),
        });
    }
    Ok(())
}

/// Values for every query row and variable, routed per variable between the
/// closed form and Monte Carlo.
pub fn attribution_values<E: CondExpEstimator + ?Sized>(
    means: &mut ConditionalMeans<'_, E>,
    delta: &[f64],
    dep_graph: &UndirectedGraph,
    config: &AttributionConfig,
) -> Result<(Matrix, Vec<Method>)> {
    let q = means.ncols();
    check_shapes(q, delta, dep_graph)?;
    let n = means.queries().nrows();
    let mut values = Matrix::zeros(n, q);
    let mut methods = Vec::with_capacity(q);
    for i in 0..q {
        let nb = neighborhoods(dep_graph, i);
        if delta[i] == 0.0 {
            // every term of the sum carries the factor delta_i
            methods.push(if nb.len() <= config.mc_threshold {
                Method::ClosedForm
            } else {
                Method::MonteCarlo
            });
            continue;
        }
        if nb.len() <= config.mc_threshold {
            let col = exact_column(means, i, delta[i], &nb)?;
            values.col_mut(i).copy_from_slice(&col);
            methods.push(Method::ClosedForm);
        } else {
            for r in 0..n {
                let s = shapley_monte_carlo(
                    means,
                    r,
                    delta[i],
                    i,
                    &nb,
                    config.mc_samples,
                    config.seed,
                )?;
                values.set(r, i, s);
            }
            methods.push(Method::MonteCarlo);
        }
    }
    Ok((values, methods))
}

/// Rankings (decreasing value, lower index first on ties) and root-cause
/// masks (value strictly positive) for every row.
pub fn rank_root_causes(values: &Matrix) -> (Vec<Vec<usize>>, Vec<Vec<bool>>) {
    (0..values.nrows())
        .map(|r| {
            let row = values.row(r);
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            (order, row.iter().map(|&v| v > 0.0).collect())
        })
        .unzip()
}

/// Fits the logistic model of `target` on `estar` and attributes every
/// sample, with the conditional means trained on `estar` itself.
pub fn attribute(
    estar: &Matrix,
    target: &[u8],
    dep_graph: &UndirectedGraph,
    config: &AttributionConfig,
) -> Result<ShapleyReport> {
    if target.len() != estar.nrows() {
        return Err(Error::DimensionMismatch {
            expected: estar.nrows(),
            got: target.len(),
        });
    }
    let delta = logistic_fit(target, estar)?;
    let mut means = ConditionalMeans::new(estar, estar, &config.estimator)?;
    let (values, method_per_var) =
        attribution_values(&mut means, &delta.coefficients, dep_graph, config)?;
    if let Some(bad) = values.columns().flatten().find(|v| !v.is_finite()) {
        return Err(Error::InvalidModel(alloc::format!(
            "non-finite Shapley value {bad}"
        )));
    }
    let (rankings, root_cause_mask) = rank_root_causes(&values);
    Ok(ShapleyReport {
        values,
        delta,
        neighborhoods: (0..estar.ncols())
            .map(|i| neighborhoods(dep_graph, i))
            .collect(),
        method_per_var,
        rankings,
        root_cause_mask,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_examples() {
        assert_eq!(psi_weights(7, 1).unwrap(), [7.0]);
        let psi = psi_weights_exact(5, 3).unwrap();
        assert_eq!(psi, [Ratio::new(5, 3), Ratio::new(5, 6), Ratio::new(5, 3)]);
        assert!(psi_weights(3, 4).is_err());
        assert!(psi_weights(65, 2).is_err());
        assert!(psi_weights(64, 64).is_ok());
    }

    #[test]
    fn ranking_example() {
        let values = Matrix::from_rows(&[vec![0.3, -0.1, 0.5], vec![-1.0, -2.0, 0.0]]).unwrap();
        let (rank, mask) = rank_root_causes(&values);
        assert_eq!(rank[0], [2, 0, 1]);
        assert_eq!(mask[0], [true, false, true]);
        assert_eq!(rank[1], [2, 0, 1]);
        assert_eq!(mask[1], [false, false, false]);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(63, 31), 916_312_070_471_295_267);
        assert_eq!(binomial(3, 4), 0);
    }
}
