//! Recovery of error terms and inducing terms by repeated partialing out.
//!
//! [`eel`] handles latent confounding; [`extract_errors`] and
//! [`direct_lingam`] assume there is none. The search logic is written once
//! against [`ColumnSpace`], so the same code runs on sample columns
//! ([`SampleSpace`]) and on exact coefficient vectors ([`oracle::OracleSpace`]).

mod lingam;
pub mod oracle;
mod space;

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

pub use lingam::{direct_lingam, find_root};
pub use space::SampleSpace;

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::linalg::{least_squares, Euclidean, Matrix};
use crate::stats::IndependenceBackend;

/// Default cap on candidate subsets examined in one run.
pub const DEFAULT_BUDGET: usize = 1_000_000;

/// Columns the extraction search mutates in place.
pub trait ColumnSpace {
    fn ncols(&self) -> usize;

    /// Residual of the current column `j` regressed on the current columns `w`.
    fn residual(&self, j: usize, w: &[usize]) -> Vec<f64>;

    /// Whether `residual` is independent of the current column `i`.
    fn independent(&mut self, residual: &[f64], i: usize) -> bool;

    /// Replaces column `j`.
    fn replace(&mut self, j: usize, column: Vec<f64>);

    fn into_columns(self) -> Vec<Vec<f64>>;
}

/// One accepted partial-out: `target` was replaced by its residual on
/// `regressors`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialStep {
    pub target: usize,
    pub regressors: Vec<usize>,
}

/// Output of an extraction run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    /// Recovered terms, one column per observed variable.
    pub estar: Matrix,
    /// Adjacencies left at termination.
    pub dep_graph: UndirectedGraph,
    pub partial_log: Vec<PartialStep>,
    /// Largest conditioning-set size the search reached.
    pub max_cond_reached: usize,
    /// The candidate budget ran out before the search finished.
    pub budget_exceeded: bool,
    /// Candidate subsets examined, cached ones included.
    pub candidates: usize,
    /// Independence tests actually evaluated.
    pub tests: usize,
}

/// Settings for [`eel`] and [`extract_errors`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EelConfig {
    pub alpha: f64,
    /// Largest conditioning-set size; `None` means `q - 1`.
    pub max_cond: Option<usize>,
    pub budget: usize,
    pub backend: IndependenceBackend,
}

impl Default for EelConfig {
    fn default() -> Self {
        EelConfig {
            alpha: 0.05,
            max_cond: None,
            budget: DEFAULT_BUDGET,
            backend: IndependenceBackend::TauStar,
        }
    }
}

/// Search state shared by EEL and EE.
struct Search<S: ColumnSpace> {
    space: S,
    graph: UndirectedGraph,
    versions: Vec<u64>,
    /// Candidates already rejected, keyed with the column versions they saw.
    rejected: BTreeSet<(usize, Vec<usize>, Vec<u64>)>,
    log: Vec<PartialStep>,
    budget: usize,
    candidates: usize,
    tests: usize,
}

/// What the search did with one candidate.
enum Verdict {
    Accepted,
    Rejected,
    OutOfBudget,
}

impl<S: ColumnSpace> Search<S> {
    fn new(space: S, budget: usize) -> Self {
        let q = space.ncols();
        Search {
            space,
            graph: UndirectedGraph::complete(q),
            versions: vec![0; q],
            rejected: BTreeSet::new(),
            log: Vec::new(),
            budget,
            candidates: 0,
            tests: 0,
        }
    }

    /// Tests `R_{O_j W}` against every member of `w`; on success partials
    /// `w` out of `j` and drops the adjacencies.
    fn try_candidate(&mut self, j: usize, w: &[usize]) -> Verdict {
        if self.candidates >= self.budget {
            return Verdict::OutOfBudget;
        }
        self.candidates += 1;
        let mut key_versions = Vec::with_capacity(w.len() + 1);
        key_versions.push(self.versions[j]);
        key_versions.extend(w.iter().map(|&i| self.versions[i]));
        let key = (j, w.to_vec(), key_versions);
        // accepted keys never recur: acceptance bumps the version of `j`
        if self.rejected.contains(&key) {
            return Verdict::Rejected;
        }
        let residual = self.space.residual(j, w);
        let mut accepted = true;
        for &i in w {
            self.tests += 1;
            if !self.space.independent(&residual, i) {
                accepted = false;
                break;
            }
        }
        if !accepted {
            self.rejected.insert(key);
            return Verdict::Rejected;
        }
        self.space.replace(j, residual);
        self.versions[j] += 1;
        for &i in w {
            self.graph.remove_edge(j, i);
        }
        self.log.push(PartialStep {
            target: j,
            regressors: w.to_vec(),
        });
        Verdict::Accepted
    }

    fn finish(
        self,
        max_cond_reached: usize,
        budget_exceeded: bool,
    ) -> (Vec<Vec<f64>>, ExtractionResult) {
        let q = self.space.ncols();
        let result = ExtractionResult {
            estar: Matrix::zeros(0, q),
            dep_graph: self.graph,
            partial_log: self.log,
            max_cond_reached,
            budget_exceeded,
            candidates: self.candidates,
            tests: self.tests,
        };
        (self.space.into_columns(), result)
    }
}

/// Calls `f` on every `l`-subset of `items` in lexicographic order until it
/// returns `Some`.
fn for_each_subset<T>(
    items: &[usize],
    l: usize,
    mut f: impl FnMut(&[usize]) -> Option<T>,
) -> Option<T> {
    let k = items.len();
    if l == 0 || l > k {
        return None;
    }
    let mut idx: Vec<usize> = (0..l).collect();
    let mut subset: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
    loop {
        if let Some(out) = f(&subset) {
            return Some(out);
        }
        // advance to the next combination
        let mut pos = l;
        while pos > 0 && idx[pos - 1] == k - l + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return None;
        }
        idx[pos - 1] += 1;
        for t in pos..l {
            idx[t] = idx[t - 1] + 1;
        }
        for t in pos - 1..l {
            subset[t] = items[idx[t]];
        }
    }
}

/// Runs the EEL search on any column space.
///
/// Returns the final columns alongside the result; the result's `estar` is
/// left empty for the caller to fill in.
pub fn eel_search<S: ColumnSpace>(
    space: S,
    max_cond: Option<usize>,
    budget: usize,
) -> (Vec<Vec<f64>>, ExtractionResult) {
    let q = space.ncols();
    let cap = max_cond.unwrap_or(q.saturating_sub(1));
    let mut search = Search::new(space, budget);
    let mut l = 0usize;
    let mut max_l = 0usize;
    loop {
        l += 1;
        if l > cap {
            break;
        }
        max_l = max_l.max(l);
        let mut verdict = None;
        for j in 0..q {
            if search.graph.degree(j) < l {
                continue;
            }
            let adj: Vec<usize> = search.graph.neighbors(j).collect();
            verdict = for_each_subset(&adj, l, |w| match search.try_candidate(j, w) {
                Verdict::Rejected => None,
                v => Some(v),
            });
            if verdict.is_some() {
                break;
            }
        }
        match verdict {
            Some(Verdict::OutOfBudget) => return search.finish(max_l, true),
            Some(_) => l = 0,
            None => {
                if (0..q).all(|j| search.graph.degree(j) < l) {
                    break;
                }
            }
        }
    }
    search.finish(max_l, false)
}

/// Runs the ExtractErrors search (univariate partialing only).
pub fn extract_errors_search<S: ColumnSpace>(
    space: S,
    budget: usize,
) -> (Vec<Vec<f64>>, ExtractionResult) {
    let q = space.ncols();
    let mut search = Search::new(space, budget);
    let mut used = false;
    'restart: loop {
        for j in 0..q {
            let adj: Vec<usize> = search.graph.neighbors(j).collect();
            for i in adj {
                used = true;
                match search.try_candidate(j, &[i]) {
                    Verdict::Rejected => {}
                    Verdict::Accepted => continue 'restart,
                    Verdict::OutOfBudget => return search.finish(1, true),
                }
            }
        }
        break;
    }
    search.finish(usize::from(used), false)
}

fn check_data(data: &Matrix) -> Result<()> {
    if data.ncols() == 0 {
        return Err(Error::InvalidArgument("no columns".into()));
    }
    for (c, col) in data.columns().enumerate() {
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "column {c} is not finite"
            )));
        }
    }
    Ok(())
}

fn with_columns(columns: Vec<Vec<f64>>, mut result: ExtractionResult) -> Result<ExtractionResult> {
    result.estar = Matrix::from_columns(columns)?;
    Ok(result)
}

/// Extract Errors with Latents on standardized sample data.
pub fn eel(data: &Matrix, config: &EelConfig) -> Result<ExtractionResult> {
    check_data(data)?;
    if config.max_cond == Some(0) {
        return Err(Error::InvalidArgument("max_cond must be at least 1".into()));
    }
    let space = SampleSpace::new(data, config.alpha, config.backend)?;
    let (columns, result) = eel_search(space, config.max_cond, config.budget);
    with_columns(columns, result)
}

/// ExtractErrors on standardized sample data; assumes no latent confounding.
pub fn extract_errors(data: &Matrix, config: &EelConfig) -> Result<ExtractionResult> {
    check_data(data)?;
    let space = SampleSpace::new(data, config.alpha, config.backend)?;
    let (columns, result) = extract_errors_search(space, config.budget);
    with_columns(columns, result)
}

/// Re-applies a partial log to `data`, reproducing the extracted columns.
pub fn replay(data: &Matrix, log: &[PartialStep]) -> Result<Matrix> {
    let mut columns: Vec<Vec<f64>> = data.columns().map(<[f64]>::to_vec).collect();
    for step in log {
        let q = columns.len();
        if step.target >= q || step.regressors.iter().any(|&i| i >= q || i == step.target) {
            return Err(Error::InvalidArgument(alloc::format!(
                "log step {step:?} does not fit {q} columns"
            )));
        }
        let regs: Vec<&[f64]> = step
            .regressors
            .iter()
            .map(|&i| columns[i].as_slice())
            .collect();
        let residual = least_squares(&Euclidean, &columns[step.target], &regs).residual;
        columns[step.target] = residual;
    }
    Matrix::from_columns(columns)
}
