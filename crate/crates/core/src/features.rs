//! Linear-time matrix features.
//!
//! The feature vector is `(n, m, pseudo-diameter, spread estimate,
//! largest-eigenvalue estimate)`. The graph is the off-diagonal sparsity
//! pattern; eigenvalue bounds come from Gershgorin discs of `A` and of two
//! diagonal similarity transforms of `A`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseSymMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("diagonal entry {row} is not positive")]
    NonpositiveDiagonal { row: usize },
    #[error("eigenvalue bounds do not intersect: [{lo}, {hi}]")]
    EmptyIntersection { lo: f64, hi: f64 },
    #[error("spread undefined: interval endpoints sum to zero")]
    DegenerateInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn is_subset_of(&self, other: &Interval, tol: f64) -> bool {
        self.lo >= other.lo - tol && self.hi <= other.hi + tol
    }

    fn hull_of(discs: impl Iterator<Item = (f64, f64)>) -> Interval {
        discs.fold(
            Interval::new(f64::INFINITY, f64::NEG_INFINITY),
            |acc, (center, radius)| {
                Interval::new(acc.lo.min(center - radius), acc.hi.max(center + radius))
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub n: usize,
    pub m: usize,
    pub pseudo_diameter: usize,
    pub spread: f64,
    pub lambda_max: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.n as f64,
            self.m as f64,
            self.pseudo_diameter as f64,
            self.spread,
            self.lambda_max,
        ]
    }
}

/// Gershgorin hulls for `A`, `S1^-1 A S1` with `S1 = diag(a_ii)` and
/// `S2^-1 A S2` with `S2 = diag(1 / a_ii)`, and their intersection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenIntervalEstimate {
    pub basic: Interval,
    pub scaled1: Interval,
    pub scaled2: Interval,
    pub combined: Interval,
}

/// Breadth-first search scratch space, reusable across sweeps.
struct Bfs {
    dist: Vec<usize>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
    work: usize,
}

impl Bfs {
    fn new(n: usize) -> Self {
        Bfs {
            dist: vec![usize::MAX; n],
            order: Vec::new(),
            queue: VecDeque::new(),
            work: 0,
        }
    }

    /// Sweeps the component of `start`; returns the farthest vertex (smallest
    /// index on ties) and its distance. Distances are reset afterwards.
    fn farthest(&mut self, a: &SparseSymMatrix, start: usize) -> (usize, usize) {
        self.sweep(a, start);
        let mut best = (start, 0);
        for &v in &self.order {
            let d = self.dist[v];
            if d > best.1 || (d == best.1 && v < best.0) {
                best = (v, d);
            }
        }
        self.reset();
        best
    }

    fn sweep(&mut self, a: &SparseSymMatrix, start: usize) {
        self.dist[start] = 0;
        self.order.push(start);
        self.queue.push_back(start);
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u];
            for v in a.neighbors(u) {
                self.work += 1;
                if self.dist[v] == usize::MAX {
                    self.dist[v] = du + 1;
                    self.order.push(v);
                    self.queue.push_back(v);
                }
            }
            self.work += 1;
        }
    }

    fn reset(&mut self) {
        for &v in &self.order {
            self.dist[v] = usize::MAX;
        }
        self.order.clear();
    }
}

/// Farthest vertex from `start` within its component and its distance.
pub fn bfs_farthest(a: &SparseSymMatrix, start: usize) -> (usize, usize) {
    Bfs::new(a.n()).farthest(a, start)
}

/// Double-sweep pseudo-diameter, taken as the maximum over connected
/// components. Each component starts from its minimum-degree vertex
/// (smallest index on ties).
pub fn pseudo_diameter(a: &SparseSymMatrix) -> usize {
    pseudo_diameter_with_work(a).0
}

/// `pseudo_diameter` plus the number of vertex and edge visits performed.
pub fn pseudo_diameter_with_work(a: &SparseSymMatrix) -> (usize, usize) {
    let n = a.n();
    let mut bfs = Bfs::new(n);
    let mut seen = vec![false; n];
    let mut starts = Vec::new();
    for v in 0..n {
        if seen[v] {
            continue;
        }
        bfs.sweep(a, v);
        let start = bfs
            .order
            .iter()
            .copied()
            .min_by_key(|&u| (a.degree(u), u))
            .expect("component contains its root");
        for &u in &bfs.order {
            seen[u] = true;
        }
        bfs.work += bfs.order.len();
        bfs.reset();
        starts.push(start);
    }
    let mut best = 0;
    for start in starts {
        let (u, _) = bfs.farthest(a, start);
        let (_, length) = bfs.farthest(a, u);
        best = best.max(length);
    }
    (best, bfs.work)
}

/// Hull of the Gershgorin discs of `A`.
pub fn gershgorin_basic(a: &SparseSymMatrix) -> Interval {
    Interval::hull_of((0..a.n()).map(|i| {
        let (cols, vals) = a.row(i);
        let mut center = 0.0;
        let mut radius = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                center = v;
            } else {
                radius += v.abs();
            }
        }
        (center, radius)
    }))
}

fn positive_diagonal(a: &SparseSymMatrix) -> Result<Vec<f64>, FeatureError> {
    let d = a.diagonal();
    match d.iter().position(|&v| !(v > 0.0)) {
        Some(row) => Err(FeatureError::NonpositiveDiagonal { row }),
        None => Ok(d),
    }
}

/// Hulls of the Gershgorin discs after diagonal similarity scaling with
/// weights `a_jj` and `1 / a_jj` respectively.
pub fn gershgorin_scaled(a: &SparseSymMatrix) -> Result<(Interval, Interval), FeatureError> {
    let d = positive_diagonal(a)?;
    let mut first = Vec::with_capacity(a.n());
    let mut second = Vec::with_capacity(a.n());
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        let mut weighted = 0.0;
        let mut inverse_weighted = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                weighted += d[j] * v.abs();
                inverse_weighted += v.abs() / d[j];
            }
        }
        first.push((d[i], weighted / d[i]));
        second.push((d[i], d[i] * inverse_weighted));
    }
    Ok((
        Interval::hull_of(first.into_iter()),
        Interval::hull_of(second.into_iter()),
    ))
}

pub fn eigen_estimates(a: &SparseSymMatrix) -> Result<EigenIntervalEstimate, FeatureError> {
    let basic = gershgorin_basic(a);
    let (scaled1, scaled2) = gershgorin_scaled(a)?;
    let combined = Interval::new(
        basic.lo.max(scaled1.lo).max(scaled2.lo),
        basic.hi.min(scaled1.hi).min(scaled2.hi),
    );
    if combined.lo > combined.hi {
        return Err(FeatureError::EmptyIntersection {
            lo: combined.lo,
            hi: combined.hi,
        });
    }
    Ok(EigenIntervalEstimate {
        basic,
        scaled1,
        scaled2,
        combined,
    })
}

/// `|hi - lo| / |hi + lo|` of the combined interval.
pub fn spread(estimate: &EigenIntervalEstimate) -> Result<f64, FeatureError> {
    let Interval { lo, hi } = estimate.combined;
    let sum = (hi + lo).abs();
    if sum == 0.0 {
        return Err(FeatureError::DegenerateInterval);
    }
    Ok((hi - lo).abs() / sum)
}

pub fn extract_features(a: &SparseSymMatrix) -> Result<FeatureVector, FeatureError> {
    extract_features_with_work(a).map(|(f, _)| f)
}

/// `extract_features` plus a count of elementary visits (graph traversal
/// steps and stored entries scanned), for complexity checks.
pub fn extract_features_with_work(
    a: &SparseSymMatrix,
) -> Result<(FeatureVector, usize), FeatureError> {
    let estimate = eigen_estimates(a)?;
    let (pseudo_diameter, bfs_work) = pseudo_diameter_with_work(a);
    let features = FeatureVector {
        n: a.n(),
        m: a.nnz(),
        pseudo_diameter,
        spread: spread(&estimate)?,
        lambda_max: estimate.combined.hi,
    };
    // three passes over the stored entries for the three disc families
    Ok((features, bfs_work + 3 * a.nnz()))
}
