//! Fixtures shared by the benchmarks.

use mpcg::dataset::{generate, DiagonalStrategy, GraphFamily, GraphSpec};
use mpcg::SparseSymMatrix;

/// Sizes the kernels are measured at.
pub const SIZES: [usize; 3] = [1_000, 10_000, 100_000];

/// Random graph with three edges per vertex on average.
pub fn random_matrix(n: usize) -> SparseSymMatrix {
    generate(&GraphSpec {
        family: GraphFamily::RandomGnm { edges: 3 * n },
        n,
        diagonal: DiagonalStrategy::default(),
        seed: 42,
    })
    .expect("valid fixture spec")
}

/// Square 5-point grid with `side * side` vertices.
pub fn grid_matrix(side: usize) -> SparseSymMatrix {
    generate(&GraphSpec {
        family: GraphFamily::Grid2d { cols: side },
        n: side * side,
        diagonal: DiagonalStrategy::DegreePlusDelta { lo: 0.5, hi: 1.0 },
        seed: 42,
    })
    .expect("valid fixture spec")
}
