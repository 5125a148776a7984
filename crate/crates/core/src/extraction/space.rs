use alloc::vec;
use alloc::vec::Vec;

use super::ColumnSpace;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Euclidean, Matrix};
use crate::stats::taustar::{taustar_pvalue, taustar_statistic, RankedColumn};
use crate::stats::{dcor_test, IndependenceBackend, DCOR_MAX_SAMPLES, MIN_TEST_SAMPLES};

/// Sample columns tested with a real independence test.
///
/// Ranks of each current column are cached until the column is replaced, so
/// the rank backend only sorts the fresh residual for each test.
#[derive(Debug, Clone)]
pub struct SampleSpace {
    columns: Vec<Vec<f64>>,
    ranks: Vec<Option<RankedColumn>>,
    alpha: f64,
    backend: IndependenceBackend,
}

impl SampleSpace {
    pub fn new(data: &Matrix, alpha: f64, backend: IndependenceBackend) -> Result<Self> {
        if data.nrows() < MIN_TEST_SAMPLES {
            return Err(Error::TooFewSamples {
                min: MIN_TEST_SAMPLES,
                got: data.nrows(),
            });
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if let IndependenceBackend::DistanceCorrelation { .. } = backend {
            if data.nrows() > DCOR_MAX_SAMPLES {
                return Err(Error::TooLarge {
                    what: "distance covariance",
                    max: DCOR_MAX_SAMPLES,
                    got: data.nrows(),
                });
            }
        }
        Ok(SampleSpace {
            columns: data.columns().map(<[f64]>::to_vec).collect(),
            ranks: vec![None; data.ncols()],
            alpha,
            backend,
        })
    }
}

impl ColumnSpace for SampleSpace {
    fn ncols(&self) -> usize {
        self.columns.len()
    }

    fn residual(&self, j: usize, w: &[usize]) -> Vec<f64> {
        let regs: Vec<&[f64]> = w.iter().map(|&i| self.columns[i].as_slice()).collect();
        least_squares(&Euclidean, &self.columns[j], &regs).residual
    }

    fn independent(&mut self, residual: &[f64], i: usize) -> bool {
        match self.backend {
            IndependenceBackend::TauStar => {
                let column = &self.columns[i];
                let ranked_col = self.ranks[i].get_or_insert_with(|| RankedColumn::new(column));
                let ranked_res = RankedColumn::new(residual);
                let t = taustar_statistic(&ranked_res, ranked_col);
                taustar_pvalue(residual.len(), t) > self.alpha
            }
            IndependenceBackend::DistanceCorrelation { permutations, seed } => {
                dcor_test(residual, &self.columns[i], self.alpha, permutations, seed)
                    .expect("sample size checked at construction")
                    .independent
            }
        }
    }

    fn replace(&mut self, j: usize, column: Vec<f64>) {
        self.columns[j] = column;
        self.ranks[j] = None;
    }

    fn into_columns(self) -> Vec<Vec<f64>> {
        self.columns
    }
}
