//! Bergsma-Dassios sign covariance `t*` in `O(n log n)`.
//!
//! For continuous data the U-statistic reduces to a count over 4-subsets:
//! a subset is concordant when, after sorting it by `x`, its two smallest
//! points lie both below or both above the two largest points in `y`. Each
//! concordant subset contributes `2/3`, every other subset `-1/3`, so
//! `t* = N_c / C(n, 4) - 1/3`.
//!
//! Counting "both below" subsets: the lower pair `{a, b}` must be dominated
//! by every point of the upper pair, i.e. both upper points lie north-east
//! of the corner `(max x, max y)` of the lower pair. If one lower point
//! dominates the other, that point is the corner, giving
//! `sum_u SW(u) C(NE(u), 2)`. Otherwise the corner mixes coordinates of two
//! incomparable points; those are summed by a sweep in decreasing `x` with a
//! lazy segment tree holding `sum R` and `sum R^2` over the still unswept
//! points, where `R_b` counts swept points above `b`. "Both above" subsets
//! are the same count with `y` reversed.
//!
//! Under independence `n t*` converges to `sum_ij lambda_ij (Z_ij^2 - 1)`
//! with `lambda_ij = 36 / (pi^4 i^2 j^2)`. P-values invert that law's
//! characteristic function numerically.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use once_cell::race::OnceBox;

use super::{IndependenceDecision, TIE_WARNING_FRACTION};

/// Ranks of a column, ties broken by position, plus its tie fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedColumn {
    ranks: Vec<u32>,
    tie_fraction: f64,
}

impl RankedColumn {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        // stable, so equal values keep index order
        order.sort_by(|&a, &b| values[a as usize].total_cmp(&values[b as usize]));
        let mut ranks = vec![0u32; n];
        let mut tied = 0usize;
        for (r, &i) in order.iter().enumerate() {
            ranks[i as usize] = r as u32;
            let v = values[i as usize];
            let same_prev = r > 0 && values[order[r - 1] as usize] == v;
            let same_next = r + 1 < n && values[order[r + 1] as usize] == v;
            if same_prev || same_next {
                tied += 1;
            }
        }
        RankedColumn {
            ranks,
            tie_fraction: if n == 0 { 0.0 } else { tied as f64 / n as f64 },
        }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    /// Share of values equal to at least one other value.
    pub fn tie_fraction(&self) -> f64 {
        self.tie_fraction
    }
}

/// Fenwick tree over counts.
struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, pos: usize) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted positions `< pos`.
    fn prefix(&self, pos: usize) -> u32 {
        let mut i = pos;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }
}

/// Points per leaf block of [`MomentTree`]. Blocks keep the tree small
/// enough to stay in cache at large `n`.
const BLOCK: usize = 8;

/// Lazy segment tree over y-ranks of active points, maintaining
/// `(count, sum R, sum R^2)` under range increments of `R`. Its leaves are
/// blocks of [`BLOCK`] ranks whose `R` values are stored flat.
struct MomentTree {
    size: usize,
    nodes: Vec<Node>,
    r: Vec<u64>,
    active: Vec<bool>,
}

#[derive(Clone, Copy, Default)]
struct Node {
    cnt: u32,
    lazy: u32,
    s1: u64,
    s2: u64,
}

impl MomentTree {
    fn all_active(n: usize) -> Self {
        let blocks = n.div_ceil(BLOCK).max(1);
        let size = blocks.next_power_of_two();
        let mut nodes = vec![Node::default(); 2 * size];
        let mut active = vec![false; size * BLOCK];
        active[..n].iter_mut().for_each(|a| *a = true);
        for (b, node) in nodes[size..size + blocks].iter_mut().enumerate() {
            node.cnt = (n - b * BLOCK).min(BLOCK) as u32;
        }
        for v in (1..size).rev() {
            nodes[v].cnt = nodes[2 * v].cnt + nodes[2 * v + 1].cnt;
        }
        MomentTree {
            size,
            nodes,
            r: vec![0; size * BLOCK],
            active,
        }
    }

    #[inline]
    fn apply(&mut self, v: usize, add: u32) {
        let node = &mut self.nodes[v];
        let (add, cnt) = (add as u64, node.cnt as u64);
        node.s2 += 2 * add * node.s1 + add * add * cnt;
        node.s1 += add * cnt;
        node.lazy += add as u32;
    }

    /// Removes the point of rank `y`, returns `(sum R, sum R^2)` over the
    /// active points ranked above it, then adds 1 to `R` of every active
    /// point ranked below it. All three follow the root-to-leaf path of `y`.
    fn sweep(&mut self, y: usize) -> (u64, u64) {
        let block = y / BLOCK;
        let (mut v, mut lo, mut hi) = (1, 0, self.size);
        let (mut s1, mut s2) = (0, 0);
        while v < self.size {
            let add = self.nodes[v].lazy;
            if add != 0 {
                self.apply(2 * v, add);
                self.apply(2 * v + 1, add);
                self.nodes[v].lazy = 0;
            }
            let mid = (lo + hi) / 2;
            if block < mid {
                let right = self.nodes[2 * v + 1];
                s1 += right.s1;
                s2 += right.s2;
                v *= 2;
                hi = mid;
            } else {
                self.apply(2 * v, 1);
                v = 2 * v + 1;
                lo = mid;
            }
        }

        let start = block * BLOCK;
        let pending = core::mem::take(&mut self.nodes[v].lazy) as u64;
        let r = &mut self.r[start..start + BLOCK];
        let active = &mut self.active[start..start + BLOCK];
        active[y - start] = false;
        let (mut cnt, mut b1, mut b2) = (0u32, 0u64, 0u64);
        for k in 0..BLOCK {
            let mut value = r[k] + pending;
            if active[k] {
                if start + k > y {
                    s1 += value;
                    s2 += value * value;
                } else {
                    value += 1;
                }
                cnt += 1;
                b1 += value;
                b2 += value * value;
            }
            r[k] = value;
        }
        self.nodes[v] = Node {
            cnt,
            lazy: 0,
            s1: b1,
            s2: b2,
        };
        while v > 1 {
            v /= 2;
            let (l, r) = (self.nodes[2 * v], self.nodes[2 * v + 1]);
            let node = &mut self.nodes[v];
            node.cnt = l.cnt + r.cnt;
            node.s1 = l.s1 + r.s1;
            node.s2 = l.s2 + r.s2;
        }
        (s1, s2)
    }
}

/// Number of 4-subsets whose two leftmost points both lie south-west of the
/// two rightmost. `perm[k]` is the y-rank of the point with x-rank `k`.
fn lower_split_count(perm: &[u32]) -> u128 {
    let n = perm.len();
    let mut total: u128 = 0;

    // one lower point dominates the other
    let mut bit = Fenwick::new(n);
    for (u, &y) in perm.iter().enumerate() {
        let y = y as usize;
        let sw = bit.prefix(y) as u64;
        let ne = (n - 1 - y) as u64 + sw - u as u64;
        total += sw as u128 * (ne * ne.saturating_sub(1) / 2) as u128;
        bit.add(y);
    }

    // incomparable lower points: b left of a and above it
    let mut tree = MomentTree::all_active(n);
    for a in (0..n).rev() {
        let (s1, s2) = tree.sweep(perm[a] as usize);
        total += ((s2 - s1) / 2) as u128;
    }
    total
}

fn choose4(n: u128) -> u128 {
    if n < 4 {
        return 0;
    }
    n * (n - 1) * (n - 2) * (n - 3) / 24
}

/// `t*` for two ranked columns of equal length (at least 4).
pub fn taustar_statistic(x: &RankedColumn, y: &RankedColumn) -> f64 {
    let n = x.len();
    assert_eq!(n, y.len(), "columns must have equal length");
    assert!(n >= 4, "t* needs at least four samples");
    let mut perm = vec![0u32; n];
    for (i, &rx) in x.ranks.iter().enumerate() {
        perm[rx as usize] = y.ranks[i];
    }
    let up = lower_split_count(&perm);
    let top = n as u32 - 1;
    perm.iter_mut().for_each(|v| *v = top - *v);
    let down = lower_split_count(&perm);
    let total = choose4(n as u128);
    let numerator = 3 * (up + down) as i128 - total as i128;
    numerator as f64 / (3.0 * total as f64)
}

/// Truncation of the eigenvalue grid; the remainder is treated as Gaussian.
const GRID: usize = 24;
const STEP: f64 = 0.01;
const UPPER: f64 = 300.0;
/// Beyond this value of the limiting variable the p-value is below 1e-30.
const CUTOFF: f64 = 60.0;

struct NullTable {
    /// `theta_0(u)` at the integration nodes, including the tail mean.
    phase: Vec<f64>,
    /// Simpson weight times `1 / (u rho(u))`, with node 0 excluded.
    weight: Vec<f64>,
}

fn null_table() -> &'static NullTable {
    static TABLE: OnceBox<NullTable> = OnceBox::new();
    TABLE.get_or_init(|| Box::new(build_null_table()))
}

fn build_null_table() -> NullTable {
    let c = 36.0 / (PI * PI * PI * PI);
    let mut lambdas = Vec::with_capacity(GRID * GRID);
    for i in 1..=GRID {
        for j in 1..=GRID {
            lambdas.push(c / ((i * i * j * j) as f64));
        }
    }
    // full sums are 1 and (36/pi^4)^2 (pi^4/90)^2 = 0.16
    let head_mean: f64 = lambdas.iter().sum();
    let head_sq: f64 = lambdas.iter().map(|l| l * l).sum();
    let tail_mean = 1.0 - head_mean;
    let tail_var = 2.0 * (0.16 - head_sq).max(0.0);

    let nodes = (UPPER / STEP) as usize;
    let nodes = nodes + (nodes % 2);
    let mut phase = vec![0.0; nodes + 1];
    let mut weight = vec![0.0; nodes + 1];
    for k in 1..=nodes {
        let u = k as f64 * STEP;
        let mut th = 0.5 * tail_mean * u;
        let mut log_rho = tail_var * u * u / 8.0;
        for &l in &lambdas {
            th += 0.5 * libm::atan(l * u);
            log_rho += 0.25 * libm::log1p(l * l * u * u);
        }
        let simpson = if k == nodes {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        phase[k] = th;
        weight[k] = simpson * STEP / 3.0 * libm::exp(-log_rho) / u;
    }
    NullTable { phase, weight }
}

/// `P(Q > x)` for `Q = sum_ij lambda_ij Z_ij^2`, by Gil-Pelaez inversion.
pub fn limiting_upper_tail(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x > CUTOFF {
        return 0.0;
    }
    let table = null_table();
    // integrand at u = 0 tends to (1 - x) / 2
    let mut integral = STEP / 3.0 * 0.5 * (1.0 - x);
    for k in 1..table.phase.len() {
        let u = k as f64 * STEP;
        integral += table.weight[k] * libm::sin(table.phase[k] - 0.5 * x * u);
    }
    (0.5 + integral / PI).clamp(0.0, 1.0)
}

/// Asymptotic p-value of an observed `t*` at sample size `n`.
pub fn taustar_pvalue(n: usize, tstar: f64) -> f64 {
    limiting_upper_tail(n as f64 * tstar + 1.0)
}

pub(crate) fn taustar_test(x: &RankedColumn, y: &RankedColumn, alpha: f64) -> IndependenceDecision {
    let n = x.len();
    let t = taustar_statistic(x, y);
    let p_value = taustar_pvalue(n, t);
    IndependenceDecision {
        statistic: (n as f64 * t + 1.0).max(0.0),
        p_value,
        independent: p_value > alpha,
        tie_warning: x.tie_fraction > TIE_WARNING_FRACTION || y.tie_fraction > TIE_WARNING_FRACTION,
    }
}
