//! Random model generation for the synthetic benchmark, dataset sampling and
//! the fixed diabetes graph.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{purpose, stream_id, stream_rng, StreamRng};
use crate::sem::{logistic, oracle_target_logit, total_effects, ErrorDist, SemModel};

/// Settings for [`generate_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    /// Total vertex count, including the target and the latents.
    pub p: usize,
    pub expected_degree: f64,
    pub latent_fraction: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            p: 15,
            expected_degree: 2.0,
            latent_fraction: 0.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 3 {
            return Err(Error::InvalidArgument(format!(
                "p must be >= 3, got {}",
                self.p
            )));
        }
        if !(0.0..1.0).contains(&self.latent_fraction) {
            return Err(Error::InvalidArgument(format!(
                "latent fraction must lie in [0, 1), got {}",
                self.latent_fraction
            )));
        }
        let prob = self.expected_degree / (self.p - 1) as f64;
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::InvalidArgument(format!(
                "expected degree {} is infeasible for p = {}",
                self.expected_degree, self.p
            )));
        }
        Ok(())
    }
}

/// Observed samples with a binary target, optionally with the hidden draws
/// of the independent terms that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n x q`.
    pub observed: Matrix,
    pub target: Vec<u8>,
    /// `n x (q + m)`, present only for synthetic data.
    pub hidden_t: Option<Matrix>,
    pub column_names: Vec<String>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.observed.nrows()
    }
}

const MAX_DRAWS: usize = 1000;

/// Edge weight from `Uniform([-1, -0.25] U [0.25, 1])`.
pub fn draw_weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let magnitude = 0.25 + 0.75 * rng.random::<f64>();
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

/// One of t(5), chi-square(3) or Uniform(-1, 1), uniformly.
pub fn draw_error_dist<R: Rng + ?Sized>(rng: &mut R) -> ErrorDist {
    match rng.random_range(0..3) {
        0 => ErrorDist::StudentT { df: 5.0 },
        1 => ErrorDist::ChiSquared { df: 3.0 },
        _ => ErrorDist::Uniform {
            low: -1.0,
            high: 1.0,
        },
    }
}

/// Draws a random model: an upper-triangular Bernoulli DAG over `p` vertices,
/// a terminal target vertex, and a set of parentless vertices hidden as
/// latents. Observed variables keep their vertex order and are named `X<v>`
/// after their 1-based vertex index.
pub fn generate_model(config: &GenConfig) -> Result<SemModel> {
    config.validate()?;
    let p = config.p;
    let prob = config.expected_degree / (p - 1) as f64;
    let mut rng = stream_rng(config.seed, stream_id(purpose::MODEL, &[]));

    let (adj, target) = (|| {
        for _ in 0..MAX_DRAWS {
            let mut adj = vec![vec![false; p]; p];
            for (i, row) in adj.iter_mut().enumerate() {
                for cell in row.iter_mut().skip(i + 1) {
                    *cell = rng.random_bool(prob);
                }
            }
            let eligible: Vec<usize> = (0..p)
                .filter(|&v| !adj[v].iter().any(|&c| c) && (0..v).any(|u| adj[u][v]))
                .collect();
            if !eligible.is_empty() {
                let target = eligible[rng.random_range(0..eligible.len())];
                return Ok((adj, target));
            }
        }
        Err(Error::Generation(format!(
            "no childless vertex with a parent after {MAX_DRAWS} draws"
        )))
    })()?;

    let wanted = libm::round(config.latent_fraction * p as f64) as usize;
    let candidates: Vec<usize> = (0..p)
        .filter(|&v| {
            v != target
                && !(0..p).any(|u| adj[u][v])
                && !adj[v][target]
                && (0..p).filter(|&c| c != target && adj[v][c]).count() >= 2
        })
        .collect();
    let mut latents: Vec<usize> = if candidates.len() <= wanted {
        candidates
    } else {
        sample_indices(&mut rng, candidates.len(), wanted)
            .into_iter()
            .map(|k| candidates[k])
            .collect()
    };
    latents.sort_unstable();

    let observed: Vec<usize> = (0..p)
        .filter(|&v| v != target && latents.binary_search(&v).is_err())
        .collect();
    let q = observed.len();
    let m = latents.len();
    let obs_pos = |v: usize| observed.binary_search(&v).ok();

    let mut beta = Matrix::zeros(q, q);
    let mut gamma = Matrix::zeros(m, q);
    for u in 0..p {
        for v in u + 1..p {
            if !adj[u][v] || v == target {
                continue;
            }
            let w = draw_weight(&mut rng);
            let child = obs_pos(v).expect("latents have no parents");
            match obs_pos(u) {
                Some(parent) => beta.set(parent, child, w),
                None => {
                    let k = latents.binary_search(&u).expect("vertex is latent");
                    gamma.set(k, child, w);
                }
            }
        }
    }
    let mut target_weights = vec![0.0; q];
    for u in 0..target {
        if adj[u][target] {
            let pos = obs_pos(u).expect("parents of the target stay observed");
            target_weights[pos] = draw_weight(&mut rng);
        }
    }
    let error_dists: Vec<ErrorDist> = (0..q + m).map(|_| draw_error_dist(&mut rng)).collect();
    let names = observed.iter().map(|v| format!("X{}", v + 1)).collect();
    SemModel::new(beta, gamma, error_dists, target_weights, 0.0, names)
}

/// Random canonical-form model with `q` observed and `m` latent variables.
///
/// Observed edges follow the index order with probability `edge_prob`; each
/// latent loads on a uniformly chosen set of at least two observed
/// variables. The target depends on every observed variable. Intended for
/// property tests over small structures.
pub fn random_sem(q: usize, m: usize, edge_prob: f64, seed: u64) -> Result<SemModel> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidArgument(format!(
            "edge probability must lie in [0, 1], got {edge_prob}"
        )));
    }
    if q < 2 && m > 0 {
        return Err(Error::InvalidArgument(
            "latents need two observed children".into(),
        ));
    }
    let mut rng = stream_rng(seed, stream_id(purpose::MODEL, &[q as u64, m as u64]));
    let mut beta = Matrix::zeros(q, q);
    for i in 0..q {
        for j in i + 1..q {
            if rng.random_bool(edge_prob) {
                beta.set(i, j, draw_weight(&mut rng));
            }
        }
    }
    let mut gamma = Matrix::zeros(m, q);
    for k in 0..m {
        let size = rng.random_range(2..=q);
        for i in sample_indices(&mut rng, q, size) {
            gamma.set(k, i, draw_weight(&mut rng));
        }
    }
    let target_weights = (0..q).map(|_| draw_weight(&mut rng)).collect();
    let error_dists = (0..q + m).map(|_| draw_error_dist(&mut rng)).collect();
    let names = (1..=q).map(|i| format!("O{i}")).collect();
    SemModel::new(beta, gamma, error_dists, target_weights, 0.0, names)
}

/// `n` independent draws of every independent term, `n x (q + m)`.
pub fn sample_terms<R: Rng + ?Sized>(model: &SemModel, n: usize, rng: &mut R) -> Matrix {
    let dists = model.error_dists();
    let mut t = Matrix::zeros(n, dists.len());
    for r in 0..n {
        for (j, d) in dists.iter().enumerate() {
            t.set(r, j, d.sample(rng));
        }
    }
    t
}

/// Samples `n` rows of observed data and targets from `model`.
pub fn sample_dataset(model: &SemModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::TooFewSamples { min: 1, got: 0 });
    }
    let theta = total_effects(model)?;
    let mut rng: StreamRng = stream_rng(seed, stream_id(purpose::DATA, &[]));
    let hidden = sample_terms(model, n, &mut rng);
    let observed = hidden.matmul(&theta.theta)?;
    let target = (0..n)
        .map(|r| {
            let prob = logistic(oracle_target_logit(model, &observed.row(r)));
            u8::from(rng.random::<f64>() < prob)
        })
        .collect();
    Ok(Dataset {
        observed,
        target,
        hidden_t: Some(hidden),
        column_names: model.names().to_vec(),
    })
}

/// Variable names of the diabetes graph, in column order.
pub const DIABETES_NAMES: [&str; 8] = [
    "age", "pedigree", "preg", "BMI", "BP", "glucose", "insulin", "skin",
];

const DIABETES_EDGES: [(&str, &str); 10] = [
    ("age", "preg"),
    ("age", "BMI"),
    ("age", "BP"),
    ("age", "glucose"),
    ("BMI", "BP"),
    ("BMI", "skin"),
    ("pedigree", "BMI"),
    ("pedigree", "glucose"),
    ("pedigree", "insulin"),
    ("glucose", "insulin"),
];

const DIABETES_TARGET_PARENTS: [&str; 3] = ["glucose", "BMI", "insulin"];

const DIABETES_SEED: u64 = 0x6469_6162_6574_6573;

/// The eight-variable diabetes graph with seeded random coefficients.
pub fn diabetes_fixture() -> SemModel {
    let idx = |name: &str| {
        DIABETES_NAMES
            .iter()
            .position(|n| *n == name)
            .expect("known name")
    };
    let q = DIABETES_NAMES.len();
    let mut rng = stream_rng(DIABETES_SEED, stream_id(purpose::MODEL, &[]));
    let mut beta = Matrix::zeros(q, q);
    for (from, to) in DIABETES_EDGES {
        beta.set(idx(from), idx(to), draw_weight(&mut rng));
    }
    let mut target_weights = vec![0.0; q];
    for name in DIABETES_TARGET_PARENTS {
        target_weights[idx(name)] = draw_weight(&mut rng);
    }
    let error_dists = (0..q).map(|_| draw_error_dist(&mut rng)).collect();
    SemModel::new(
        beta,
        Matrix::zeros(0, q),
        error_dists,
        target_weights,
        0.0,
        DIABETES_NAMES.iter().map(|s| String::from(*s)).collect(),
    )
    .expect("fixture is a valid DAG")
}
