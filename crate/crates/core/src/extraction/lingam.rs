use alloc::vec::Vec;

use super::{ExtractionResult, PartialStep};
use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::linalg::{least_squares, Euclidean, Matrix};
use crate::stats::{mean_sd, pairwise_measure};

/// Index of the column that looks most like a root: the one with the
/// smallest accumulated pairwise penalty, first index on ties.
///
/// Columns are expected to be standardized.
pub fn find_root(columns: &[&[f64]]) -> usize {
    let k = columns.len();
    if k <= 1 {
        return 0;
    }
    let mut scores = alloc::vec![0.0; k];
    for i in 0..k {
        for j in i + 1..k {
            scores[i] += pairwise_measure(columns[i], columns[j]);
            scores[j] += pairwise_measure(columns[j], columns[i]);
        }
    }
    let mut best = 0;
    for i in 1..k {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    best
}

fn standardized(x: &[f64]) -> Vec<f64> {
    let (mean, sd) = mean_sd(x);
    let sd = if sd > 0.0 { sd } else { 1.0 };
    x.iter().map(|v| (v - mean) / sd).collect()
}

/// DirectLiNGAM: repeatedly finds a root among the remaining variables and
/// partials it out of the others. Assumes no latent confounding.
pub fn direct_lingam(data: &Matrix) -> Result<ExtractionResult> {
    let q = data.ncols();
    if q == 0 {
        return Err(Error::InvalidArgument("no columns".into()));
    }
    if data.nrows() < 2 {
        return Err(Error::TooFewSamples {
            min: 2,
            got: data.nrows(),
        });
    }
    let mut columns: Vec<Vec<f64>> = data.columns().map(<[f64]>::to_vec).collect();
    let mut remaining: Vec<usize> = (0..q).collect();
    let mut log = Vec::new();
    while !remaining.is_empty() {
        let scaled: Vec<Vec<f64>> = remaining
            .iter()
            .map(|&i| standardized(&columns[i]))
            .collect();
        let views: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
        let root = remaining.remove(find_root(&views));
        for &j in &remaining {
            let residual = least_squares(&Euclidean, &columns[j], &[&columns[root]]).residual;
            columns[j] = residual;
            log.push(PartialStep {
                target: j,
                regressors: alloc::vec![root],
            });
        }
    }
    Ok(ExtractionResult {
        estar: Matrix::from_columns(columns)?,
        dep_graph: UndirectedGraph::empty(q),
        partial_log: log,
        max_cond_reached: usize::from(q > 1),
        budget_exceeded: false,
        candidates: 0,
        tests: 0,
    })
}
