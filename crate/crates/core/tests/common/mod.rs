//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use mpcg::dataset::{DiagonalStrategy, GraphFamily, GraphSpec};
use mpcg::{SparseSymMatrix, Symmetry};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

pub fn dense(a: &SparseSymMatrix) -> DMatrix<f64> {
    let n = a.n();
    let mut d = DMatrix::zeros(n, n);
    for (i, j, v) in a.triplets() {
        d[(i, j)] = v;
    }
    d
}

/// Ascending eigenvalues from a dense symmetric eigensolver.
pub fn eigenvalues(a: &SparseSymMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(dense(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn condition_number(a: &SparseSymMatrix) -> f64 {
    let ev = eigenvalues(a);
    ev[ev.len() - 1] / ev[0]
}

fn adjacency(a: &SparseSymMatrix) -> Vec<Vec<usize>> {
    (0..a.n())
        .map(|i| a.row(i).0.iter().copied().filter(|&j| j != i).collect())
        .collect()
}

fn bfs_distances(adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[s] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Largest finite shortest-path distance over all vertex pairs.
pub fn diameter(a: &SparseSymMatrix) -> usize {
    let adj = adjacency(a);
    (0..a.n())
        .map(|s| {
            bfs_distances(&adj, s)
                .into_iter()
                .flatten()
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}

pub fn is_connected(a: &SparseSymMatrix) -> bool {
    bfs_distances(&adjacency(a), 0).iter().all(Option::is_some)
}

pub fn is_tree(a: &SparseSymMatrix) -> bool {
    let edges = (a.nnz() - a.n()) / 2;
    edges + 1 == a.n() && is_connected(a)
}

/// Relabels vertices: row `i` of the result is row `perm[i]` of `a`.
pub fn permuted(a: &SparseSymMatrix, perm: &[usize]) -> SparseSymMatrix {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let t: Vec<_> = a.triplets().map(|(i, j, v)| (inv[i], inv[j], v)).collect();
    SparseSymMatrix::from_coordinates(a.n(), &t, Symmetry::Full).unwrap()
}

/// Strictly diagonally dominant symmetric matrix with random signed
/// off-diagonal weights, built without the library's generators.
pub fn random_dominant(rng: &mut impl Rng, n: usize, density: f64) -> SparseSymMatrix {
    let mut t = Vec::new();
    let mut radius = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..i {
            if rng.gen_bool(density) {
                let v: f64 = rng.gen_range(-3.0..3.0);
                if v != 0.0 {
                    t.push((i, j, v));
                    t.push((j, i, v));
                    radius[i] += v.abs();
                    radius[j] += v.abs();
                }
            }
        }
    }
    for (i, r) in radius.iter().enumerate() {
        t.push((i, i, r + rng.gen_range(0.05..5.0)));
    }
    SparseSymMatrix::from_coordinates(n, &t, Symmetry::Full).unwrap()
}

/// A spec drawn across every graph family with `n` in `[lo, hi]`.
pub fn random_spec(rng: &mut impl Rng, lo: usize, hi: usize) -> GraphSpec {
    let n = rng.gen_range(lo..=hi);
    let family = match rng.gen_range(0..7) {
        0 => GraphFamily::Path,
        1 => GraphFamily::Cycle,
        2 => {
            let cols = rng.gen_range(1..=(n as f64).sqrt() as usize);
            let n = n / cols * cols;
            return GraphSpec {
                family: GraphFamily::Grid2d { cols },
                n,
                diagonal: diagonal(rng),
                seed: rng.gen(),
            };
        }
        3 => GraphFamily::TreeRandom,
        4 => GraphFamily::Star,
        5 => {
            let degree = rng.gen_range(1..=4.min(n - 1));
            let n = if degree * n % 2 == 1 { n - 1 } else { n };
            return GraphSpec {
                family: GraphFamily::RandomRegular { degree },
                n,
                diagonal: diagonal(rng),
                seed: rng.gen(),
            };
        }
        _ => GraphFamily::RandomGnm {
            edges: rng.gen_range(0..=(n * (n - 1) / 2).min(3 * n)),
        },
    };
    GraphSpec {
        family,
        n,
        diagonal: diagonal(rng),
        seed: rng.gen(),
    }
}

fn diagonal(rng: &mut impl Rng) -> DiagonalStrategy {
    DiagonalStrategy::DegreePlusDelta {
        lo: 0.1,
        hi: rng.gen_range(0.2..4.0),
    }
}

/// `‖b − A x‖ / ‖b‖` accumulated from the triplets in binary64.
pub fn relative_residual(a: &SparseSymMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut r = b.to_vec();
    for (i, j, v) in a.triplets() {
        r[i] -= v * x[j];
    }
    let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb == 0.0 {
        nr
    } else {
        nr / nb
    }
}
