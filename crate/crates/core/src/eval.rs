//! Ground-truth attributions for synthetic models and the scores that
//! compare estimates against them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::extraction::oracle::SUPPORT_TOLERANCE;
use crate::extraction::{eel, EelConfig};
use crate::linalg::{least_squares, Matrix, Weighted};
use crate::rng::{derive_seed, purpose, stream_id, stream_rng};
use crate::sem::{inducing_structure, total_effects, InducingStructure, SemModel};
use crate::shapley::{attribute, attribution_values, AttributionConfig, ConditionalMeans, Method};
use crate::stats::{standardize, IndependenceBackend};
use crate::synth::{generate_model, sample_dataset, sample_terms, GenConfig};

/// Fresh oracle draws used to train the ground-truth conditional means.
pub const GROUND_TRUTH_DRAWS: usize = 100_000;

/// Coefficients of the target's log-odds on the oracle inducing terms.
///
/// The log-odds are linear in `T` and the inducing terms span the same
/// space as the observed variables, so this population regression under
/// `Var(T)` is exact. Coefficients that are zero up to rounding are set to
/// exactly zero, so terms with no effect on the target get no attribution.
pub fn oracle_delta(model: &SemModel, structure: &InducingStructure) -> Result<Vec<f64>> {
    let theta = total_effects(model)?;
    let k = model.q() + model.m();
    let logit: Vec<f64> = (0..k)
        .map(|t| {
            (0..model.q())
                .map(|i| theta.theta.get(t, i) * model.target_weights()[i])
                .sum()
        })
        .collect();
    let weights = model.term_variances();
    let regs: Vec<&[f64]> = structure.estar_coeffs.columns().collect();
    let mut delta = least_squares(&Weighted(&weights), &logit, &regs).coefficients;
    let scale = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    for d in &mut delta {
        if d.abs() <= SUPPORT_TOLERANCE * scale {
            *d = 0.0;
        }
    }
    Ok(delta)
}

/// Settings for [`ground_truth_shapley`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthConfig {
    /// Oracle draws for the conditional-mean fits.
    pub draws: usize,
    pub seed: u64,
    /// Estimator and routing; the Monte Carlo fallback rarely triggers.
    pub attribution: AttributionConfig,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        GroundTruthConfig {
            draws: GROUND_TRUTH_DRAWS,
            seed: 0,
            attribution: AttributionConfig {
                mc_threshold: crate::shapley::MAX_EXACT_NEIGHBORHOOD,
                ..AttributionConfig::default()
            },
        }
    }
}

/// True Shapley values for the rows of `t_samples` (`n x (q + m)`).
///
/// Uses the oracle inducing terms, the oracle dependence graph, the exact
/// log-odds coefficients of [`oracle_delta`], and conditional means fit on
/// `config.draws` fresh oracle draws. The unconditional mean is exactly 0.
pub fn ground_truth_shapley(
    model: &SemModel,
    structure: &InducingStructure,
    t_samples: &Matrix,
    config: &GroundTruthConfig,
) -> Result<(Matrix, Vec<Method>)> {
    let k = model.q() + model.m();
    if t_samples.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: t_samples.ncols(),
        });
    }
    if config.draws == 0 {
        return Err(Error::TooFewSamples { min: 1, got: 0 });
    }
    let delta = oracle_delta(model, structure)?;
    let queries = t_samples.matmul(&structure.estar_coeffs)?;
    let mut rng = stream_rng(config.seed, stream_id(purpose::ORACLE_DRAWS, &[]));
    let train = sample_terms(model, config.draws, &mut rng).matmul(&structure.estar_coeffs)?;
    let mut means =
        ConditionalMeans::new(&train, &queries, &config.attribution.estimator)?.centered();
    attribution_values(
        &mut means,
        &delta,
        &structure.dep_edges,
        &config.attribution,
    )
}

/// Rank-biased overlap averaged over samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RboScore {
    /// Mean over the scored samples; `NaN` when none were scored.
    pub mean: f64,
    pub scored: usize,
    /// Samples without a true root cause, left out of the mean.
    pub skipped: usize,
}

/// Rank-biased overlap of estimated rankings against true Shapley values.
///
/// For a sample with `r` true root causes (strictly positive true values)
/// ranked `R_1, ..., R_r` by decreasing value, the score is
/// `sum_i s_i |top_i(estimate) ∩ {R_1..R_i}| / i` with `s_i` the true value
/// of `R_i` normalized over the root causes. Samples with no true root cause
/// are skipped and counted.
pub fn rbo(rankings: &[Vec<usize>], truth: &Matrix) -> Result<RboScore> {
    if rankings.len() != truth.nrows() {
        return Err(Error::DimensionMismatch {
            expected: truth.nrows(),
            got: rankings.len(),
        });
    }
    let q = truth.ncols();
    let (mut total, mut scored, mut skipped) = (0.0, 0, 0);
    let mut in_truth = alloc::vec![false; q];
    let mut in_est = alloc::vec![false; q];
    for (k, est) in rankings.iter().enumerate() {
        let row = truth.row(k);
        let mut causes: Vec<usize> = (0..q).filter(|&i| row[i] > 0.0).collect();
        if causes.is_empty() {
            skipped += 1;
            continue;
        }
        causes.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        if est.len() < causes.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "ranking {k} has {} entries but {} true root causes",
                est.len(),
                causes.len()
            )));
        }
        if let Some(&bad) = est.iter().find(|&&i| i >= q) {
            return Err(Error::InvalidArgument(alloc::format!(
                "ranking {k} names variable {bad} of {q}"
            )));
        }
        let mass: f64 = causes.iter().map(|&i| row[i]).sum();
        in_truth.iter_mut().for_each(|x| *x = false);
        in_est.iter_mut().for_each(|x| *x = false);
        let mut overlap = 0usize;
        let mut score = 0.0;
        for (depth, (&t, &e)) in causes.iter().zip(est).enumerate() {
            in_truth[t] = true;
            if in_est[t] {
                overlap += 1;
            }
            if !in_est[e] {
                in_est[e] = true;
                if in_truth[e] {
                    overlap += 1;
                }
            }
            score += row[t] / mass * overlap as f64 / (depth + 1) as f64;
        }
        total += score;
        scored += 1;
    }
    Ok(RboScore {
        mean: if scored == 0 {
            f64::NAN
        } else {
            total / scored as f64
        },
        scored,
        skipped,
    })
}

/// Mean squared difference over all cells.
pub fn mse(estimate: &Matrix, truth: &Matrix) -> Result<f64> {
    if estimate.nrows() != truth.nrows() || estimate.ncols() != truth.ncols() {
        return Err(Error::DimensionMismatch {
            expected: truth.nrows() * truth.ncols(),
            got: estimate.nrows() * estimate.ncols(),
        });
    }
    let cells = (truth.nrows() * truth.ncols()) as f64;
    let ss: f64 = estimate
        .columns()
        .zip(truth.columns())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
        .sum();
    Ok(ss / cells)
}

/// One synthetic replicate: model, data and every setting downstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateConfig {
    pub generator: GenConfig,
    pub n: usize,
    pub eel: EelConfig,
    pub attribution: AttributionConfig,
    pub ground_truth: GroundTruthConfig,
}

impl Default for ReplicateConfig {
    fn default() -> Self {
        ReplicateConfig {
            generator: GenConfig::default(),
            n: 10_000,
            eel: EelConfig::default(),
            attribution: AttributionConfig::default(),
            ground_truth: GroundTruthConfig::default(),
        }
    }
}

impl ReplicateConfig {
    /// Settings for one replicate of a cell, with every seed derived
    /// from `seed` and the index path so replicates are independent of
    /// execution order.
    pub fn for_replicate(template: &ReplicateConfig, seed: u64, path: &[u64]) -> ReplicateConfig {
        let mut cfg = *template;
        cfg.generator.seed = derive_seed(seed, purpose::MODEL, path);
        cfg.attribution.seed = derive_seed(seed, purpose::MONTE_CARLO, path);
        cfg.ground_truth.seed = derive_seed(seed, purpose::ORACLE_DRAWS, path);
        cfg.ground_truth.attribution.seed = cfg.attribution.seed;
        if let IndependenceBackend::DistanceCorrelation {
            seed: ref mut s, ..
        } = cfg.eel.backend
        {
            *s = derive_seed(seed, purpose::PERMUTATION, path);
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub rbo: RboScore,
    pub mse: f64,
    pub q: usize,
    pub m: usize,
    /// Edges of the estimated and the oracle dependence graphs.
    pub estimated_edges: usize,
    pub oracle_edges: usize,
    pub budget_exceeded: bool,
}

/// Generates a model and data, runs EEL on the standardized data, attributes
/// with the fitted logistic model, and scores against the ground truth.
pub fn run_replicate(cfg: &ReplicateConfig) -> Result<ReplicateOutcome> {
    let model = generate_model(&cfg.generator)?;
    let data = sample_dataset(
        &model,
        cfg.n,
        derive_seed(cfg.generator.seed, purpose::DATA, &[]),
    )?;
    let hidden = data
        .hidden_t
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("dataset has no hidden terms".into()))?;
    let standardized = standardize(&data.observed)?;
    let extraction = eel(&standardized.data, &cfg.eel)?;
    let report = attribute(
        &extraction.estar,
        &data.target,
        &extraction.dep_graph,
        &cfg.attribution,
    )?;
    let theta = total_effects(&model)?;
    let structure = inducing_structure(&model, &theta);
    let (truth, _) = ground_truth_shapley(&model, &structure, hidden, &cfg.ground_truth)?;
    Ok(ReplicateOutcome {
        rbo: rbo(&report.rankings, &truth)?,
        mse: mse(&report.values, &truth)?,
        q: model.q(),
        m: model.m(),
        estimated_edges: extraction.dep_graph.edge_count(),
        oracle_edges: structure.dep_edges.edge_count(),
        budget_exceeded: extraction.budget_exceeded,
    })
}
