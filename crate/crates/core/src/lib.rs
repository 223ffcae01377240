//! Mixed-precision two-stage conjugate gradient solving for sparse
//! symmetric positive definite systems, with a nearest-neighbour model that
//! picks the stage-1 tolerance from cheap structural features.
//!
//! The first stage runs (preconditioned) CG in binary32 to a loose relative
//! tolerance; its iterate seeds a binary64 run to the target tolerance. The
//! cost `mu * N1 + N2` of that pipeline depends on the loose tolerance, which
//! [`regression::KnnModel`] predicts from a [`FeatureVector`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod features;
pub mod regression;
pub mod solver;
pub mod sparse;

pub use dataset::{DatasetError, EpsilonGrid, SampleRecord};
pub use features::{extract_features, FeatureError, FeatureVector, Interval};
pub use regression::{evaluate, EvalReport, KnnModel, RegressionError, Split, SplitMode};
pub use solver::{
    cg, pcg_jacobi, solve, two_stage_solve, Preconditioner, ResidualMode, SolveConfig, SolveError,
    SolveResult, SolveStatus, Stagnation, TwoStageResult, TwoStageSolver,
};
pub use sparse::{Real, ReducedMatrix, SparseError, SparseSymMatrix, Symmetry};
