//! Exact column space for checking the extraction algorithms without
//! sampling noise.
//!
//! Every column is the coefficient vector of an observed variable over the
//! independent terms `T`. Regressions are population regressions under the
//! inner product weighted by `Var(T)`. Two linear combinations of independent
//! non-Gaussian terms are independent exactly when no term carries a nonzero
//! coefficient in both, so the independence test reduces to a support check.

use alloc::vec::Vec;

use super::{eel_search, extract_errors_search, ColumnSpace, ExtractionResult, DEFAULT_BUDGET};
use crate::error::Result;
use crate::linalg::{least_squares, Matrix, Weighted};
use crate::sem::{total_effects, SemModel};

/// Coefficients below this magnitude count as cancelled.
pub const SUPPORT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OracleSpace {
    columns: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl OracleSpace {
    /// Columns `theta[., i]` of the model's total effects.
    pub fn new(model: &SemModel) -> Result<Self> {
        let theta = total_effects(model)?;
        Ok(OracleSpace {
            columns: theta.theta.into_columns(),
            weights: model.term_variances(),
        })
    }

    /// Arbitrary coefficient columns over terms with the given variances.
    pub fn from_columns(columns: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        OracleSpace { columns, weights }
    }
}

/// Whether two coefficient vectors share a term.
pub fn shares_support(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .any(|(x, y)| x.abs() > SUPPORT_TOLERANCE && y.abs() > SUPPORT_TOLERANCE)
}

impl ColumnSpace for OracleSpace {
    fn ncols(&self) -> usize {
        self.columns.len()
    }

    fn residual(&self, j: usize, w: &[usize]) -> Vec<f64> {
        let regs: Vec<&[f64]> = w.iter().map(|&i| self.columns[i].as_slice()).collect();
        least_squares(&Weighted(&self.weights), &self.columns[j], &regs).residual
    }

    fn independent(&mut self, residual: &[f64], i: usize) -> bool {
        !shares_support(residual, &self.columns[i])
    }

    fn replace(&mut self, j: usize, column: Vec<f64>) {
        self.columns[j] = column;
    }

    fn into_columns(self) -> Vec<Vec<f64>> {
        self.columns
    }
}

/// EEL under the oracle; `estar` holds coefficient vectors, `(q + m) x q`.
pub fn oracle_eel(model: &SemModel, max_cond: Option<usize>) -> Result<ExtractionResult> {
    let (columns, mut result) = eel_search(OracleSpace::new(model)?, max_cond, DEFAULT_BUDGET);
    result.estar = Matrix::from_columns(columns)?;
    Ok(result)
}

/// ExtractErrors under the oracle; `estar` holds coefficient vectors.
pub fn oracle_extract_errors(model: &SemModel) -> Result<ExtractionResult> {
    let (columns, mut result) = extract_errors_search(OracleSpace::new(model)?, DEFAULT_BUDGET);
    result.estar = Matrix::from_columns(columns)?;
    Ok(result)
}
