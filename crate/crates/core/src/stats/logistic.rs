//! Logistic regression by Newton's method (iteratively reweighted least
//! squares) with step halving.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};

/// Ridge penalty (on the mean log-likelihood scale) used when the plain fit
/// is singular or the classes are separable.
pub const RIDGE_FALLBACK: f64 = 1e-6;

const MAX_ITERATIONS: usize = 100;
const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_HALVINGS: usize = 50;
/// Linear predictors this large mean fitted probabilities have saturated.
const SEPARATION_LOGIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Gradient max-norm fell below `1e-8`.
    pub converged: bool,
    pub iterations: usize,
    /// Penalty actually used: 0, or [`RIDGE_FALLBACK`].
    pub ridge: f64,
    /// Penalized mean log-likelihood after each accepted iterate, starting
    /// with the initial point.
    pub loglik_trace: Vec<f64>,
}

impl LogisticFit {
    pub fn logit(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

struct Problem<'a> {
    y: &'a [u8],
    cols: Vec<&'a [f64]>,
    ridge: f64,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn eta(&self, w: &[f64]) -> Vec<f64> {
        let mut eta = vec![w[0]; self.n()];
        for (c, &wc) in self.cols.iter().zip(&w[1..]) {
            for (e, &x) in eta.iter_mut().zip(c.iter()) {
                *e += wc * x;
            }
        }
        eta
    }

    fn objective(&self, w: &[f64], eta: &[f64]) -> f64 {
        let ll: f64 = eta
            .iter()
            .zip(self.y)
            .map(|(&e, &y)| f64::from(y) * e - softplus(e))
            .sum();
        let pen: f64 = w.iter().map(|v| v * v).sum();
        ll / self.n() as f64 - 0.5 * self.ridge * pen
    }

    /// Gradient and row-major Hessian of the negated objective's curvature.
    fn derivatives(&self, w: &[f64], eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = w.len();
        let n = self.n() as f64;
        let prob: Vec<f64> = eta.iter().map(|&e| crate::sem::logistic(e)).collect();
        let resid: Vec<f64> = prob
            .iter()
            .zip(self.y)
            .map(|(p, &y)| f64::from(y) - p)
            .collect();
        let weight: Vec<f64> = prob.iter().map(|p| p * (1.0 - p)).collect();
        let col = |a: usize| -> Option<&[f64]> {
            if a == 0 {
                None
            } else {
                Some(self.cols[a - 1])
            }
        };
        let mut grad = vec![0.0; k];
        let mut hess = vec![0.0; k * k];
        for a in 0..k {
            grad[a] = match col(a) {
                None => resid.iter().sum::<f64>(),
                Some(x) => x.iter().zip(&resid).map(|(x, r)| x * r).sum(),
            } / n
                - self.ridge * w[a];
            for b in 0..=a {
                let h = match (col(a), col(b)) {
                    (None, None) => weight.iter().sum::<f64>(),
                    (Some(x), None) | (None, Some(x)) => {
                        x.iter().zip(&weight).map(|(x, v)| x * v).sum()
                    }
                    (Some(x), Some(z)) => x
                        .iter()
                        .zip(z.iter())
                        .zip(&weight)
                        .map(|((x, z), v)| x * z * v)
                        .sum(),
                } / n;
                hess[a * k + b] = h;
                hess[b * k + a] = h;
            }
            hess[a * k + a] += self.ridge;
        }
        (grad, hess)
    }
}

enum Outcome {
    Fit(LogisticFit),
    Singular,
}

fn newton(problem: &Problem<'_>) -> Outcome {
    let k = problem.cols.len() + 1;
    let mut w = vec![0.0; k];
    let mut eta = problem.eta(&w);
    let mut obj = problem.objective(&w, &eta);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let (grad, hess) = problem.derivatives(&w, &eta);
        if grad.iter().all(|g| g.abs() < GRADIENT_TOLERANCE) {
            converged = true;
            break;
        }
        let Some(step) = cholesky_solve(&hess, &grad) else {
            return Outcome::Singular;
        };
        iterations += 1;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let cand_eta = problem.eta(&cand);
            let cand_obj = problem.objective(&cand, &cand_eta);
            if cand_obj >= obj {
                accepted = Some((cand, cand_eta, cand_obj));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_eta, cand_obj)) = accepted else {
            // no ascent possible at working precision
            break;
        };
        w = cand;
        eta = cand_eta;
        obj = cand_obj;
        trace.push(obj);
    }
    if !converged && iterations < MAX_ITERATIONS {
        let (grad, _) = problem.derivatives(&w, &eta);
        converged = grad.iter().all(|g| g.abs() < GRADIENT_TOLERANCE);
    }
    Outcome::Fit(LogisticFit {
        intercept: w[0],
        coefficients: w[1..].to_vec(),
        converged,
        iterations,
        ridge: problem.ridge,
        loglik_trace: trace,
    })
}

/// Fits `P(D = 1 | x) = logistic(x . coefficients + intercept)` by maximum
/// likelihood. Falls back to a `1e-6` ridge penalty when the Hessian is
/// singular or the fitted logits diverge (separable classes).
pub fn logistic_fit(target: &[u8], x: &Matrix) -> Result<LogisticFit> {
    if target.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: target.len(),
        });
    }
    if target.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("target must be 0/1".into()));
    }
    let ones = target.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == target.len() {
        return Err(Error::SingleClass);
    }
    let mut problem = Problem {
        y: target,
        cols: x.columns().collect(),
        ridge: 0.0,
    };
    if let Outcome::Fit(fit) = newton(&problem) {
        let separated =
            x.nrows() > 0 && (0..x.nrows()).any(|r| fit.logit(&x.row(r)).abs() > SEPARATION_LOGIT);
        if !separated {
            return Ok(fit);
        }
    }
    problem.ridge = RIDGE_FALLBACK;
    match newton(&problem) {
        Outcome::Fit(fit) => Ok(fit),
        Outcome::Singular => Err(Error::InvalidArgument(
            "logistic Hessian singular even with ridge".into(),
        )),
    }
}
