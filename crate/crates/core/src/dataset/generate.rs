//! Strictly diagonally dominant test matrices built on unweighted graphs.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::sparse::{SparseSymMatrix, SymCsr};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphFamily {
    Path,
    Cycle,
    /// `n / cols` rows by `cols` columns.
    Grid2d {
        cols: usize,
    },
    /// Random recursive tree: vertex `i` attaches to a uniform earlier vertex.
    TreeRandom,
    Star,
    RandomRegular {
        degree: usize,
    },
    RandomGnm {
        edges: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagonalStrategy {
    /// `a_ii = deg(i) + delta_i`, `delta_i` uniform in `[lo, hi]`.
    DegreePlusDelta { lo: f64, hi: f64 },
    /// `a_ii = value`; requires `value > max degree`.
    UniformConstant { value: f64 },
}

impl Default for DiagonalStrategy {
    fn default() -> Self {
        DiagonalStrategy::DegreePlusDelta { lo: 0.1, hi: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub family: GraphFamily,
    pub n: usize,
    pub diagonal: DiagonalStrategy,
    pub seed: u64,
}

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
        }
    }

    fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Graph::empty(n);
        for (u, v) in edges {
            g.adjacency[u].push(v);
            g.adjacency[v].push(u);
        }
        for list in &mut g.adjacency {
            list.sort_unstable();
        }
        g
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Unit off-diagonal weights plus the given diagonal.
    fn to_matrix(&self, diagonal: &[f64]) -> Result<SparseSymMatrix, DatasetError> {
        let n = self.n();
        let mut row_starts = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(n + 2 * self.num_edges());
        let mut vals = Vec::with_capacity(cols.capacity());
        row_starts.push(0);
        for (i, list) in self.adjacency.iter().enumerate() {
            let split = list.partition_point(|&j| j < i);
            for &j in &list[..split] {
                cols.push(j);
                vals.push(1.0);
            }
            cols.push(i);
            vals.push(diagonal[i]);
            for &j in &list[split..] {
                cols.push(j);
                vals.push(1.0);
            }
            row_starts.push(cols.len());
        }
        Ok(SymCsr::from_csr_parts(n, row_starts, cols, vals)?)
    }
}

fn invalid(msg: impl Into<String>) -> DatasetError {
    DatasetError::InvalidSpec(msg.into())
}

/// Builds the off-diagonal graph of `spec`, consuming randomness from `rng`.
fn build_graph(spec: &GraphSpec, rng: &mut ChaCha8Rng) -> Result<Graph, DatasetError> {
    let n = spec.n;
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let graph = match spec.family {
        GraphFamily::Path => Graph::from_edges(n, (1..n).map(|i| (i - 1, i))),
        GraphFamily::Cycle => {
            if n < 3 {
                return Err(invalid("a cycle needs at least 3 vertices"));
            }
            Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
        }
        GraphFamily::Grid2d { cols } => {
            if cols == 0 || !n.is_multiple_of(cols) {
                return Err(invalid(format!(
                    "grid with {cols} columns does not tile n = {n}"
                )));
            }
            let rows = n / cols;
            let mut edges = Vec::with_capacity(2 * n);
            for r in 0..rows {
                for c in 0..cols {
                    let v = r * cols + c;
                    if c + 1 < cols {
                        edges.push((v, v + 1));
                    }
                    if r + 1 < rows {
                        edges.push((v, v + cols));
                    }
                }
            }
            Graph::from_edges(n, edges)
        }
        GraphFamily::TreeRandom => Graph::from_edges(
            n,
            (1..n).map(|i| (rng.gen_range(0..i), i)).collect::<Vec<_>>(),
        ),
        GraphFamily::Star => Graph::from_edges(n, (1..n).map(|i| (0, i))),
        GraphFamily::RandomRegular { degree } => random_regular(n, degree, rng)?,
        GraphFamily::RandomGnm { edges } => random_gnm(n, edges, rng)?,
    };
    Ok(graph)
}

/// Incremental stub pairing that only accepts pairs keeping the graph
/// simple, restarting when it gets stuck.
fn random_regular(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> Result<Graph, DatasetError> {
    if degree >= n {
        return Err(invalid(format!("degree {degree} must be below n = {n}")));
    }
    if !(degree * n).is_multiple_of(2) {
        return Err(invalid(format!(
            "degree * n must be even, got {degree} * {n}"
        )));
    }
    'restart: for _ in 0..100 {
        let mut g = Graph::empty(n);
        let mut stubs: Vec<usize> = (0..n)
            .flat_map(|v| std::iter::repeat_n(v, degree))
            .collect();
        while !stubs.is_empty() {
            let mut paired = false;
            for _ in 0..(50 + 4 * stubs.len()) {
                let a = rng.gen_range(0..stubs.len());
                let b = rng.gen_range(0..stubs.len());
                let (u, v) = (stubs[a], stubs[b]);
                if a == b || u == v || g.adjacency[u].contains(&v) {
                    continue;
                }
                g.adjacency[u].push(v);
                g.adjacency[v].push(u);
                let (hi, lo) = (a.max(b), a.min(b));
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                paired = true;
                break;
            }
            if !paired {
                continue 'restart;
            }
        }
        for list in &mut g.adjacency {
            list.sort_unstable();
        }
        return Ok(g);
    }
    Err(invalid(format!(
        "could not realise a {degree}-regular graph on {n} vertices"
    )))
}

fn random_gnm(n: usize, edges: usize, rng: &mut ChaCha8Rng) -> Result<Graph, DatasetError> {
    let pairs = n * (n - 1) / 2;
    if edges > pairs {
        return Err(invalid(format!(
            "{edges} edges exceed the {pairs} vertex pairs"
        )));
    }
    let chosen = sample_pairs(n, edges, |_, _| false, pairs, rng);
    Ok(Graph::from_edges(n, chosen))
}

/// Draws `count` distinct unordered pairs `(u < v)` not rejected by
/// `exists`; `available` is the number of admissible pairs.
fn sample_pairs(
    n: usize,
    count: usize,
    exists: impl Fn(usize, usize) -> bool,
    available: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    if count == 0 {
        return Vec::new();
    }
    if 2 * count > available {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !exists(u, v))
            .collect();
        let (picked, _) = all.partial_shuffle(rng, count);
        return picked.to_vec();
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if exists(pair.0, pair.1) || !seen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    out
}

fn diagonal_for(
    graph: &Graph,
    strategy: &DiagonalStrategy,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, DatasetError> {
    match *strategy {
        DiagonalStrategy::DegreePlusDelta { lo, hi } => {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(invalid(format!(
                    "delta range [{lo}, {hi}] must be positive and ordered"
                )));
            }
            Ok((0..graph.n())
                .map(|i| {
                    graph.degree(i) as f64 + if lo == hi { lo } else { rng.gen_range(lo..=hi) }
                })
                .collect())
        }
        DiagonalStrategy::UniformConstant { value } => {
            let max_degree = graph.max_degree();
            if !(value > max_degree as f64) || !value.is_finite() {
                return Err(invalid(format!(
                    "constant diagonal {value} must exceed the max degree {max_degree}"
                )));
            }
            Ok(vec![value; graph.n()])
        }
    }
}

pub fn generate_graph(spec: &GraphSpec) -> Result<Graph, DatasetError> {
    build_graph(spec, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

/// Deterministic strictly diagonally dominant matrix for `spec`.
pub fn generate(spec: &GraphSpec) -> Result<SparseSymMatrix, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let graph = build_graph(spec, &mut rng)?;
    let diagonal = diagonal_for(&graph, &spec.diagonal, &mut rng)?;
    graph.to_matrix(&diagonal)
}

fn variant_seed(seed: u64, variant: usize) -> u64 {
    seed ^ (variant as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Near copies of `base`, each with `edges_to_add` extra random unit edges
/// and a fresh diagonal drawn from `diagonal` for the enlarged graph.
///
/// `base` is expected to come from [`generate`]: off-diagonal entries are
/// read as unit edges.
pub fn perturb(
    base: &SparseSymMatrix,
    diagonal: &DiagonalStrategy,
    variants: usize,
    edges_to_add: usize,
    seed: u64,
) -> Result<Vec<SparseSymMatrix>, DatasetError> {
    if edges_to_add == 0 {
        return Err(invalid("edges_to_add must be at least 1"));
    }
    let n = base.n();
    let pairs = n * (n - 1) / 2;
    let existing = (base.nnz() - n) / 2;
    let available = pairs - existing;
    if available < edges_to_add {
        return Err(DatasetError::GraphFull {
            requested: edges_to_add,
            available,
        });
    }
    let base_edges: Vec<(usize, usize)> = base
        .triplets()
        .filter(|&(i, j, _)| i < j)
        .map(|(i, j, _)| (i, j))
        .collect();
    (0..variants)
        .map(|v| {
            let mut rng = ChaCha8Rng::seed_from_u64(variant_seed(seed, v));
            let added = sample_pairs(
                n,
                edges_to_add,
                |i, j| base.get(i, j).is_some(),
                available,
                &mut rng,
            );
            let graph = Graph::from_edges(n, base_edges.iter().copied().chain(added));
            let diag = diagonal_for(&graph, diagonal, &mut rng)?;
            graph.to_matrix(&diag)
        })
        .collect()
}
