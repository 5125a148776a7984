//! Linear structural equation models with latent confounders in canonical
//! form, together with the analytic quantities that serve as ground truth:
//! total effects, inducing-term supports and the dependence graph they imply.
//!
//! Independent terms `T` are ordered `E_1..E_q` followed by `L_1..L_m`, so
//! `T_j = E_j` for `j < q`. Observed variables satisfy `O = O beta + L gamma + E`,
//! equivalently `O = T theta` with `theta = [lambda; gamma lambda]` and
//! `lambda = (I - beta)^-1`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StudentT};

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::linalg::Matrix;

/// Continuous non-Gaussian distribution of one independent term.
///
/// Draws are always centered to mean zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorDist {
    StudentT { df: f64 },
    ChiSquared { df: f64 },
    Uniform { low: f64, high: f64 },
}

impl ErrorDist {
    /// Tag used in serialized models.
    pub fn kind(&self) -> &'static str {
        match self {
            ErrorDist::StudentT { .. } => "t",
            ErrorDist::ChiSquared { .. } => "chisq",
            ErrorDist::Uniform { .. } => "uniform",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            ErrorDist::StudentT { df } | ErrorDist::ChiSquared { df } => vec![df],
            ErrorDist::Uniform { low, high } => vec![low, high],
        }
    }

    pub fn from_kind(kind: &str, params: &[f64]) -> Result<Self> {
        let bad = || Error::InvalidModel(format!("bad parameters {params:?} for '{kind}'"));
        let dist = match (kind, params) {
            ("t", &[df]) => ErrorDist::StudentT { df },
            ("chisq", &[df]) => ErrorDist::ChiSquared { df },
            ("uniform", &[low, high]) => ErrorDist::Uniform { low, high },
            ("t" | "chisq" | "uniform", _) => return Err(bad()),
            _ => {
                return Err(Error::InvalidModel(format!(
                    "unknown distribution '{kind}'"
                )))
            }
        };
        dist.validate().map(|_| dist)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            // finite variance is needed for the population regressions
            ErrorDist::StudentT { df } => df > 2.0 && df.is_finite(),
            ErrorDist::ChiSquared { df } => df > 0.0 && df.is_finite(),
            ErrorDist::Uniform { low, high } => low < high && low.is_finite() && high.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "invalid distribution {self:?}"
            )))
        }
    }

    /// Mean of the raw (uncentered) distribution.
    pub fn raw_mean(&self) -> f64 {
        match *self {
            ErrorDist::StudentT { .. } => 0.0,
            ErrorDist::ChiSquared { df } => df,
            ErrorDist::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ErrorDist::StudentT { df } => df / (df - 2.0),
            ErrorDist::ChiSquared { df } => 2.0 * df,
            ErrorDist::Uniform { low, high } => (high - low) * (high - low) / 12.0,
        }
    }

    /// One mean-zero draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let raw = match *self {
            ErrorDist::StudentT { df } => StudentT::new(df).expect("validated").sample(rng),
            ErrorDist::ChiSquared { df } => ChiSquared::new(df).expect("validated").sample(rng),
            ErrorDist::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        };
        raw - self.raw_mean()
    }
}

/// Ground-truth linear SEM with latent confounders and a logistic target.
#[derive(Debug, Clone, PartialEq)]
pub struct SemModel {
    beta: Matrix,
    gamma: Matrix,
    error_dists: Vec<ErrorDist>,
    target_weights: Vec<f64>,
    target_intercept: f64,
    names: Vec<String>,
}

impl SemModel {
    /// Validates and assembles a model.
    ///
    /// `beta[(j, i)]` is the coefficient of `O_j` in the equation of `O_i`;
    /// `gamma[(k, i)]` the loading of `L_k` on `O_i`.
    pub fn new(
        beta: Matrix,
        gamma: Matrix,
        error_dists: Vec<ErrorDist>,
        target_weights: Vec<f64>,
        target_intercept: f64,
        names: Vec<String>,
    ) -> Result<Self> {
        let q = beta.nrows();
        let m = gamma.nrows();
        let check = |expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, got })
            }
        };
        check(q, beta.ncols())?;
        if m > 0 {
            check(q, gamma.ncols())?;
        }
        check(q + m, error_dists.len())?;
        check(q, target_weights.len())?;
        check(q, names.len())?;
        if q == 0 {
            return Err(Error::InvalidModel("no observed variables".into()));
        }
        let finite = beta.columns().flatten().all(|v| v.is_finite())
            && gamma.columns().flatten().all(|v| v.is_finite())
            && target_weights.iter().all(|v| v.is_finite())
            && target_intercept.is_finite();
        if !finite {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        for d in &error_dists {
            d.validate()?;
        }
        for k in 0..m {
            let children = (0..q).filter(|&i| gamma.get(k, i) != 0.0).count();
            if children < 2 {
                return Err(Error::InvalidModel(format!(
                    "latent {k} has {children} observed children, needs at least 2"
                )));
            }
        }
        let gamma = if m == 0 { Matrix::zeros(0, q) } else { gamma };
        let model = SemModel {
            beta,
            gamma,
            error_dists,
            target_weights,
            target_intercept,
            names,
        };
        model.topological_order()?;
        Ok(model)
    }

    /// Number of observed variables.
    pub fn q(&self) -> usize {
        self.beta.nrows()
    }

    /// Number of latent variables.
    pub fn m(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn beta(&self) -> &Matrix {
        &self.beta
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn error_dists(&self) -> &[ErrorDist] {
        &self.error_dists
    }

    pub fn target_weights(&self) -> &[f64] {
        &self.target_weights
    }

    pub fn target_intercept(&self) -> f64 {
        self.target_intercept
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Labels of the independent terms, `E_<name>` then `L<k>`.
    pub fn term_names(&self) -> Vec<String> {
        let mut out: Vec<String> = self.names.iter().map(|n| format!("E_{n}")).collect();
        out.extend((1..=self.m()).map(|k| format!("L{k}")));
        out
    }

    /// Observed parents of `O_i`.
    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.q())
            .filter(|&j| self.beta.get(j, i) != 0.0)
            .collect()
    }

    /// Observed children of latent `k`.
    pub fn latent_children(&self, k: usize) -> Vec<usize> {
        (0..self.q())
            .filter(|&i| self.gamma.get(k, i) != 0.0)
            .collect()
    }

    /// Latent parents of `O_i`.
    pub fn latent_parents(&self, i: usize) -> Vec<usize> {
        (0..self.m())
            .filter(|&k| self.gamma.get(k, i) != 0.0)
            .collect()
    }

    /// Kahn's algorithm over the observed DAG; ties resolved by index.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let q = self.q();
        let mut indeg: Vec<usize> = (0..q).map(|i| self.parents(i).len()).collect();
        let mut ready: BTreeSet<usize> = (0..q).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(q);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for c in 0..q {
                if self.beta.get(v, c) != 0.0 {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        ready.insert(c);
                    }
                }
            }
        }
        if order.len() == q {
            Ok(order)
        } else {
            Err(Error::Cyclic)
        }
    }

    /// `ancestors[a][b]` is true when a directed path `O_a -> ... -> O_b`
    /// exists (strict: no vertex is its own ancestor).
    pub fn ancestor_matrix(&self) -> Vec<Vec<bool>> {
        let q = self.q();
        let order = self.topological_order().expect("validated at construction");
        let mut anc = vec![vec![false; q]; q];
        for &v in &order {
            for p in self.parents(v) {
                anc[p][v] = true;
                for a in 0..q {
                    if anc[a][p] {
                        anc[a][v] = true;
                    }
                }
            }
        }
        anc
    }

    /// Variances of the independent terms, in `T` order.
    pub fn term_variances(&self) -> Vec<f64> {
        self.error_dists.iter().map(ErrorDist::variance).collect()
    }
}

/// Total effects of every independent term on every observed variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMatrix {
    /// `(q + m) x q`; entry `(t, i)` is the total effect of `T_t` on `O_i`.
    pub theta: Matrix,
}

impl ThetaMatrix {
    /// Observed values `O = t theta` for one draw of the independent terms.
    pub fn observe(&self, t_sample: &[f64]) -> Result<Vec<f64>> {
        if t_sample.len() != self.theta.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.nrows(),
                got: t_sample.len(),
            });
        }
        Ok(self
            .theta
            .columns()
            .map(|c| c.iter().zip(t_sample).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Computes `theta = [lambda; gamma lambda]` by forward substitution in
/// topological order; `(I - beta)` is never inverted explicitly.
pub fn total_effects(model: &SemModel) -> Result<ThetaMatrix> {
    let q = model.q();
    let m = model.m();
    let order = model.topological_order()?;
    let parents: Vec<Vec<usize>> = (0..q).map(|i| model.parents(i)).collect();
    let mut theta = Matrix::zeros(q + m, q);
    for t in 0..q + m {
        for &i in &order {
            let direct = if t < q {
                if t == i {
                    1.0
                } else {
                    0.0
                }
            } else {
                model.gamma.get(t - q, i)
            };
            let via: f64 = parents[i]
                .iter()
                .map(|&j| theta.get(t, j) * model.beta.get(j, i))
                .sum();
            theta.set(t, i, direct + via);
        }
    }
    Ok(ThetaMatrix { theta })
}

/// Supports and coefficients of the inducing terms.
#[derive(Debug, Clone, PartialEq)]
pub struct InducingStructure {
    /// `C_i`: indices into `T` lying on a directed inducing path to `O_i`.
    pub c_sets: Vec<BTreeSet<usize>>,
    /// `(q + m) x q`; column `i` equals `theta[., i]` on `C_i` and zero elsewhere.
    pub estar_coeffs: Matrix,
    /// Edge `{i, j}` iff `C_i` and `C_j` intersect.
    pub dep_edges: UndirectedGraph,
    /// Largest number of observed vertices on a confounding path of any `O_i`.
    pub depth_d: usize,
}

/// Derives the inducing structure of a model.
///
/// A directed inducing path to `O_i` can only use edges out of `T` members:
/// every observed vertex other than `O_i` is a collider, so two observed
/// vertices are never adjacent on it. Such paths are therefore chains
/// `O_i <- L -> O_a <- L' -> O_b ...` through strict ancestors of `O_i`,
/// closed off by an error term or latent pointing into the last observed
/// vertex. `C_i` is computed by a breadth-first search over those chains.
/// Confounding paths follow the same shape but may end at any observed
/// vertex; `depth_d` enumerates them depth-first, which is exponential in the
/// number of latents and meant for oracle-sized models (`q + m <= 20`).
pub fn inducing_structure(model: &SemModel, theta: &ThetaMatrix) -> InducingStructure {
    let q = model.q();
    let m = model.m();
    let anc = model.ancestor_matrix();
    let latent_parents: Vec<Vec<usize>> = (0..q).map(|i| model.latent_parents(i)).collect();
    let latent_children: Vec<Vec<usize>> = (0..m).map(|k| model.latent_children(k)).collect();

    let mut c_sets = Vec::with_capacity(q);
    for i in 0..q {
        let mut visited = vec![false; q];
        visited[i] = true;
        let mut queue = vec![i];
        let mut c = BTreeSet::new();
        c.insert(i);
        while let Some(x) = queue.pop() {
            for &k in &latent_parents[x] {
                c.insert(q + k);
                for &y in &latent_children[k] {
                    if !visited[y] && anc[y][i] {
                        visited[y] = true;
                        c.insert(y);
                        queue.push(y);
                    }
                }
            }
        }
        c_sets.push(c);
    }

    let mut estar_coeffs = Matrix::zeros(q + m, q);
    for (i, c) in c_sets.iter().enumerate() {
        for &t in c {
            estar_coeffs.set(t, i, theta.theta.get(t, i));
        }
    }

    let mut dep_edges = UndirectedGraph::empty(q);
    for i in 0..q {
        for j in i + 1..q {
            if !c_sets[i].is_disjoint(&c_sets[j]) {
                dep_edges.add_edge(i, j);
            }
        }
    }

    let depth_d = (0..q)
        .map(|i| confounding_depth(i, &anc, &latent_parents, &latent_children))
        .max()
        .unwrap_or(0);

    InducingStructure {
        c_sets,
        estar_coeffs,
        dep_edges,
        depth_d,
    }
}

/// Longest chain `O_1 <- L -> O_2 <- L' -> ... O_r` whose first `r - 1`
/// vertices are strict ancestors of `O_i`, with distinct vertices.
fn confounding_depth(
    i: usize,
    anc: &[Vec<bool>],
    latent_parents: &[Vec<usize>],
    latent_children: &[Vec<usize>],
) -> usize {
    fn extend(
        x: usize,
        i: usize,
        anc: &[Vec<bool>],
        latent_parents: &[Vec<usize>],
        latent_children: &[Vec<usize>],
        used_o: &mut Vec<bool>,
        used_l: &mut Vec<bool>,
    ) -> usize {
        // x is a collider here, so it has to be an ancestor of O_i
        if !anc[x][i] {
            return 1;
        }
        let mut best = 1;
        for &k in &latent_parents[x] {
            if used_l[k] {
                continue;
            }
            used_l[k] = true;
            for &y in &latent_children[k] {
                if used_o[y] {
                    continue;
                }
                used_o[y] = true;
                let len = 1 + extend(y, i, anc, latent_parents, latent_children, used_o, used_l);
                best = best.max(len);
                used_o[y] = false;
            }
            used_l[k] = false;
        }
        best
    }
    let q = anc.len();
    let m = latent_children.len();
    let mut used_o = vec![false; q];
    let mut used_l = vec![false; m];
    let mut best = 1;
    for start in 0..q {
        used_o[start] = true;
        let len = extend(
            start,
            i,
            anc,
            latent_parents,
            latent_children,
            &mut used_o,
            &mut used_l,
        );
        best = best.max(len);
        used_o[start] = false;
    }
    best
}

/// `E*_i = sum_{t in C_i} t_sample[t] theta[t, i]` for one draw of `T`.
pub fn oracle_inducing_terms(structure: &InducingStructure, t_sample: &[f64]) -> Result<Vec<f64>> {
    let rows = structure.estar_coeffs.nrows();
    if t_sample.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: t_sample.len(),
        });
    }
    Ok(structure
        .estar_coeffs
        .columns()
        .map(|c| c.iter().zip(t_sample).map(|(a, b)| a * b).sum())
        .collect())
}

/// Log-odds of `D = 1` given observed values: `o . beta_D + alpha`.
pub fn oracle_target_logit(model: &SemModel, o_sample: &[f64]) -> f64 {
    o_sample
        .iter()
        .zip(&model.target_weights)
        .map(|(o, w)| o * w)
        .sum::<f64>()
        + model.target_intercept
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// The two-variable confounded model `L1 -> O1, L1 -> O2, O1 -> O2`.
///
/// Handy as a minimal case where error terms are not recoverable.
pub fn confounded_pair(gamma_11: f64, gamma_12: f64, beta_12: f64) -> SemModel {
    let beta = Matrix::from_rows(&[vec![0.0, beta_12], vec![0.0, 0.0]]).expect("2x2");
    let gamma = Matrix::from_rows(&[vec![gamma_11, gamma_12]]).expect("1x2");
    let uniform = ErrorDist::Uniform {
        low: -1.0,
        high: 1.0,
    };
    SemModel::new(
        beta,
        gamma,
        vec![uniform; 3],
        vec![0.0, 1.0],
        0.0,
        vec!["O1".into(), "O2".into()],
    )
    .expect("valid confounded pair")
}
