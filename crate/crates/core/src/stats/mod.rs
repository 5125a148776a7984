//! Numerical primitives shared by the extraction and attribution stages.

mod dcor;
mod entropy;
mod logistic;
pub mod taustar;

use alloc::vec::Vec;

pub use dcor::{dcor_statistic, dcor_test, DCOR_MAX_SAMPLES};
pub use entropy::{entropy, pairwise_measure};
pub use logistic::{logistic_fit, LogisticFit, RIDGE_FALLBACK};
pub use taustar::{taustar_pvalue, taustar_statistic, RankedColumn};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, Euclidean, LeastSquares, Matrix};

/// Smallest sample size accepted by [`independence_test`].
pub const MIN_TEST_SAMPLES: usize = 100;

/// Fraction of tied values above which a test result carries a warning.
pub const TIE_WARNING_FRACTION: f64 = 0.2;

/// Column-standardized data with the transform needed to undo it.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub data: Matrix,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Centers every column and scales it to unit sample variance (`n - 1`
/// denominator).
pub fn standardize(data: &Matrix) -> Result<Standardized> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { min: 2, got: n });
    }
    let mut out = data.clone();
    let mut means = Vec::with_capacity(data.ncols());
    let mut scales = Vec::with_capacity(data.ncols());
    for c in 0..data.ncols() {
        let (mean, sd) = mean_sd(data.col(c));
        if !(sd > 0.0) || sd <= 1e-12 * mean.abs() {
            return Err(Error::ConstantColumn { column: c });
        }
        for v in out.col_mut(c) {
            *v = (*v - mean) / sd;
        }
        means.push(mean);
        scales.push(sd);
    }
    Ok(Standardized {
        data: out,
        means,
        scales,
    })
}

/// Sample mean and standard deviation (`n - 1` denominator).
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1.0)))
}

/// Residuals of `y` regressed on the columns `w`, without an intercept.
///
/// Regressors spanned by earlier ones are dropped and listed in the result.
pub fn ols_residuals(y: &[f64], w: &[&[f64]]) -> Result<LeastSquares> {
    for col in w {
        if col.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: col.len(),
            });
        }
    }
    if y.len() <= w.len() {
        return Err(Error::TooFewSamples {
            min: w.len() + 1,
            got: y.len(),
        });
    }
    Ok(least_squares(&Euclidean, y, w))
}

/// Outcome of a marginal independence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependenceDecision {
    pub statistic: f64,
    pub p_value: f64,
    /// `p_value > alpha`.
    pub independent: bool,
    /// More than 20% of the values of either input are tied.
    pub tie_warning: bool,
}

/// Which statistic backs [`independence_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndependenceBackend {
    /// Bergsma-Dassios sign covariance with its asymptotic null.
    #[default]
    TauStar,
    /// Distance covariance calibrated by permutations.
    DistanceCorrelation { permutations: usize, seed: u64 },
}

impl IndependenceBackend {
    pub fn name(&self) -> &'static str {
        match self {
            IndependenceBackend::TauStar => "taustar",
            IndependenceBackend::DistanceCorrelation { .. } => "dcor",
        }
    }

    /// Parses `"taustar"` or `"dcor"`; the permutation backend gets 199
    /// permutations and the given seed.
    pub fn from_name(name: &str, seed: u64) -> Option<Self> {
        match name {
            "taustar" => Some(IndependenceBackend::TauStar),
            "dcor" => Some(IndependenceBackend::DistanceCorrelation {
                permutations: 199,
                seed,
            }),
            _ => None,
        }
    }
}

/// Tests `x` against `y` at level `alpha`.
pub fn independence_test(
    x: &[f64],
    y: &[f64],
    alpha: f64,
    backend: IndependenceBackend,
) -> Result<IndependenceDecision> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < MIN_TEST_SAMPLES {
        return Err(Error::TooFewSamples {
            min: MIN_TEST_SAMPLES,
            got: x.len(),
        });
    }
    match backend {
        IndependenceBackend::TauStar => Ok(taustar::taustar_test(
            &RankedColumn::new(x),
            &RankedColumn::new(y),
            alpha,
        )),
        IndependenceBackend::DistanceCorrelation { permutations, seed } => {
            dcor_test(x, y, alpha, permutations, seed)
        }
    }
}
