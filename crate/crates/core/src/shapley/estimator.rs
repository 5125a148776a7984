//! Conditional-expectation estimators used inside the Shapley sums.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::linalg::{least_squares, Euclidean};
use crate::stats::mean_sd;

/// Regression of a target column on a set of conditioning columns.
///
/// `fit_predict` trains on `(features, target)` and returns predictions at
/// `n_queries` query rows whose columns are given in `queries`. With no
/// features the prediction is the mean of the target.
pub trait CondExpEstimator {
    fn fit_predict(
        &self,
        target: &[f64],
        features: &[&[f64]],
        queries: &[&[f64]],
        n_queries: usize,
    ) -> Vec<f64>;
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// k-nearest-neighbor regression. Each feature is scaled by its training
/// standard deviation before distances are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Knn {
    /// Neighbor count; `None` means `round(sqrt(n))` for `n` training rows.
    pub k: Option<usize>,
}

impl Knn {
    pub fn neighbors_for(&self, n: usize) -> usize {
        let k = self
            .k
            .unwrap_or_else(|| libm::round(libm::sqrt(n as f64)) as usize);
        k.clamp(1, n.max(1))
    }
}

impl CondExpEstimator for Knn {
    fn fit_predict(
        &self,
        target: &[f64],
        features: &[&[f64]],
        queries: &[&[f64]],
        n_queries: usize,
    ) -> Vec<f64> {
        let n = target.len();
        if features.is_empty() || n == 0 {
            return vec![if n == 0 { 0.0 } else { mean(target) }; n_queries];
        }
        let k = self.neighbors_for(n);
        if features.len() == 1 {
            let sorted = SortedLine::new(features[0], target);
            return queries[0]
                .iter()
                .map(|&x| sorted.mean_nearest(x, k))
                .collect();
        }
        let scales: Vec<f64> = features
            .iter()
            .map(|c| {
                let sd = mean_sd(c).1;
                if sd > 0.0 && sd.is_finite() {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        let tree = KdTree::new(features, &scales, target);
        let d = features.len();
        let scales = &scales;
        let points: Vec<f64> = (0..n_queries)
            .flat_map(|r| (0..d).map(move |c| queries[c][r] * scales[c]))
            .collect();
        // visiting queries in tree order keeps consecutive searches in cache
        let mut order: Vec<(usize, usize)> = (0..n_queries)
            .map(|r| (tree.home(&points[r * d..(r + 1) * d]), r))
            .collect();
        order.sort_unstable();
        let mut out = vec![0.0; n_queries];
        for (_, r) in order {
            out[r] = tree.mean_nearest(&points[r * d..(r + 1) * d], k);
        }
        out
    }
}

/// Ordinary least squares with an intercept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Linear;

impl CondExpEstimator for Linear {
    fn fit_predict(
        &self,
        target: &[f64],
        features: &[&[f64]],
        queries: &[&[f64]],
        n_queries: usize,
    ) -> Vec<f64> {
        let ones = vec![1.0; target.len()];
        let mut regs: Vec<&[f64]> = vec![&ones];
        regs.extend_from_slice(features);
        let b = least_squares(&Euclidean, target, &regs).coefficients;
        (0..n_queries)
            .map(|r| {
                b[0] + queries
                    .iter()
                    .zip(&b[1..])
                    .map(|(c, w)| c[r] * w)
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Choice of estimator carried in configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Knn(Knn),
    Linear,
}

impl Default for EstimatorKind {
    fn default() -> Self {
        EstimatorKind::Knn(Knn::default())
    }
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Knn(_) => "knn",
            EstimatorKind::Linear => "linear",
        }
    }
}

impl CondExpEstimator for EstimatorKind {
    fn fit_predict(
        &self,
        target: &[f64],
        features: &[&[f64]],
        queries: &[&[f64]],
        n_queries: usize,
    ) -> Vec<f64> {
        match self {
            EstimatorKind::Knn(k) => k.fit_predict(target, features, queries, n_queries),
            EstimatorKind::Linear => Linear.fit_predict(target, features, queries, n_queries),
        }
    }
}

/// One-dimensional neighbor search: the `k` nearest points on a line form a
/// contiguous window of the sorted sample, found by bisection.
struct SortedLine {
    xs: Vec<f64>,
    /// prefix[i] = sum of the targets of the first `i` sorted points.
    prefix: Vec<f64>,
}

impl SortedLine {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        let xs = order.iter().map(|&i| x[i]).collect();
        let mut prefix = Vec::with_capacity(x.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for &i in &order {
            acc += y[i];
            prefix.push(acc);
        }
        SortedLine { xs, prefix }
    }

    fn mean_nearest(&self, x: f64, k: usize) -> f64 {
        let (mut lo, mut hi) = (0, self.xs.len() - k);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if x - self.xs[mid] > self.xs[mid + k] - x {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        (self.prefix[lo + k] - self.prefix[lo]) / k as f64
    }
}

const LEAF_SIZE: usize = 16;

/// Balanced kd-tree stored implicitly: the node for `lo..hi` sits at the
/// midpoint, and its children cover the two halves.
struct KdTree {
    d: usize,
    /// Row-major scaled coordinates, in tree order.
    points: Vec<f64>,
    values: Vec<f64>,
    /// Original row of each tree position; breaks distance ties.
    rows: Vec<usize>,
    split: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Neighbor {
    dist: f64,
    row: usize,
    value: f64,
}

impl Neighbor {
    /// Order by distance, then by original row.
    fn before(&self, other: &Neighbor) -> bool {
        self.cmp(other) == Ordering::Less
    }

    fn cmp(&self, other: &Neighbor) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.row.cmp(&other.row))
    }
}

/// The `k` smallest candidates seen so far, kept as an unsorted buffer that
/// is cut back to `k` whenever it reaches `2k`. Cheaper than a heap when `k`
/// is in the hundreds.
struct Nearest {
    k: usize,
    buf: Vec<Neighbor>,
    /// The current `k`-th smallest once `k` candidates have been seen.
    cutoff: Option<Neighbor>,
}

impl Nearest {
    fn new(k: usize) -> Self {
        Nearest {
            k,
            buf: Vec::with_capacity(2 * k),
            cutoff: None,
        }
    }

    fn radius(&self) -> f64 {
        self.cutoff.map_or(f64::INFINITY, |c| c.dist)
    }

    fn push(&mut self, cand: Neighbor) {
        if let Some(c) = &self.cutoff {
            if !cand.before(c) {
                return;
            }
        }
        self.buf.push(cand);
        if self.cutoff.is_none() && self.buf.len() == self.k {
            self.cutoff = self.buf.iter().copied().max_by(Neighbor::cmp);
        } else if self.buf.len() == 2 * self.k {
            self.shrink();
        }
    }

    fn shrink(&mut self) {
        if self.buf.len() > self.k {
            self.buf.select_nth_unstable_by(self.k - 1, Neighbor::cmp);
            self.buf.truncate(self.k);
            self.cutoff = Some(self.buf[self.k - 1]);
        }
    }

    fn mean(mut self) -> f64 {
        self.shrink();
        self.buf.iter().map(|nb| nb.value).sum::<f64>() / self.buf.len() as f64
    }
}

impl KdTree {
    fn new(features: &[&[f64]], scales: &[f64], target: &[f64]) -> Self {
        let d = features.len();
        let n = target.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut split = vec![0; n];
        Self::build(features, &mut order, 0, &mut split);
        let mut points = Vec::with_capacity(n * d);
        for &r in &order {
            points.extend(features.iter().zip(scales).map(|(c, s)| c[r] * s));
        }
        KdTree {
            d,
            points,
            values: order.iter().map(|&r| target[r]).collect(),
            rows: order,
            split,
        }
    }

    fn build(features: &[&[f64]], order: &mut [usize], offset: usize, split: &mut [usize]) {
        if order.len() <= LEAF_SIZE {
            return;
        }
        // split on the coordinate with the widest range
        let (mut dim, mut width) = (0, f64::NEG_INFINITY);
        for (c, col) in features.iter().enumerate() {
            let (lo, hi) = order
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    (lo.min(col[r]), hi.max(col[r]))
                });
            if hi - lo > width {
                dim = c;
                width = hi - lo;
            }
        }
        let col = features[dim];
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        split[offset + mid] = dim;
        let (left, right) = order.split_at_mut(mid);
        Self::build(features, left, offset, split);
        Self::build(features, &mut right[1..], offset + mid + 1, split);
    }

    fn point(&self, pos: usize) -> &[f64] {
        &self.points[pos * self.d..(pos + 1) * self.d]
    }

    fn offer(&self, best: &mut Nearest, x: &[f64], pos: usize) {
        let dist: f64 = self
            .point(pos)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if dist <= best.radius() {
            best.push(Neighbor {
                dist,
                row: self.rows[pos],
                value: self.values[pos],
            });
        }
    }

    /// Depth-first search. `offsets[c]` is the distance along coordinate `c`
    /// from `x` to the current cell and `bound` the sum of their squares, a
    /// lower bound on the distance to any point in the cell.
    fn search(
        &self,
        best: &mut Nearest,
        x: &[f64],
        range: (usize, usize),
        bound: f64,
        offsets: &mut [f64],
    ) {
        let (lo, hi) = range;
        if hi - lo <= LEAF_SIZE {
            for pos in lo..hi {
                self.offer(best, x, pos);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let dim = self.split[mid];
        let diff = x[dim] - self.point(mid)[dim];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(best, x, near, bound, offsets);
        self.offer(best, x, mid);
        let old = offsets[dim];
        let far_bound = bound - old * old + diff * diff;
        if far_bound <= best.radius() {
            offsets[dim] = diff;
            self.search(best, x, far, far_bound, offsets);
            offsets[dim] = old;
        }
    }

    /// Start of the leaf range that `x` descends to.
    fn home(&self, x: &[f64]) -> usize {
        let (mut lo, mut hi) = (0, self.values.len());
        while hi - lo > LEAF_SIZE {
            let mid = lo + (hi - lo) / 2;
            if x[self.split[mid]] < self.point(mid)[self.split[mid]] {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    fn mean_nearest(&self, x: &[f64], k: usize) -> f64 {
        let mut best = Nearest::new(k);
        let mut offsets = vec![0.0; self.d];
        self.search(&mut best, x, (0, self.values.len()), 0.0, &mut offsets);
        best.mean()
    }
}
