//! Training data: generated matrices labeled with their cheapest stage-1
//! tolerance.
//!
//! A sample is a JSON-lines file with one [`SampleRecord`] per matrix, in plan
//! order, accompanied by a [`DatasetManifest`].

mod generate;
mod label;
mod sample;

pub use generate::{
    generate, generate_graph, perturb, DiagonalStrategy, Graph, GraphFamily, GraphSpec,
};
pub use label::{label_matrix, ones_rhs, select_label};
pub use sample::{
    build_sample, read_manifest, read_sample, write_manifest, DatasetManifest, MatrixOrigin,
    PlanEntry, SamplePlan, SAMPLE_FORMAT_VERSION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureVector};
use crate::solver::{SolveError, SolveStatus};
use crate::sparse::SparseError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),
    #[error("cannot add {requested} edges: only {available} non-edges remain")]
    GraphFull { requested: usize, available: usize },
    #[error("invalid epsilon grid: {0}")]
    InvalidGrid(String),
    #[error("no grid value produced a cost")]
    EmptyCosts,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed sample data: {0}")]
    Json(#[from] serde_json::Error),
}

/// Candidate stage-1 tolerances, strictly descending. Class `l` (1-based)
/// denotes `values[l - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonGrid {
    values: Vec<f64>,
    epsilon2: f64,
    mu: f64,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        EpsilonGrid {
            values: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
            epsilon2: 1e-10,
            mu: 0.5,
        }
    }
}

impl EpsilonGrid {
    pub fn new(values: Vec<f64>, epsilon2: f64, mu: f64) -> Result<Self, DatasetError> {
        if values.is_empty() {
            return Err(DatasetError::InvalidGrid("grid is empty".into()));
        }
        if values.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(DatasetError::InvalidGrid(
                "values must be strictly descending".into(),
            ));
        }
        if !(epsilon2 > 0.0) {
            return Err(DatasetError::InvalidGrid(format!(
                "epsilon2 must be positive, got {epsilon2}"
            )));
        }
        if values[values.len() - 1] < epsilon2 {
            return Err(DatasetError::InvalidGrid(
                "smallest grid value is below epsilon2".into(),
            ));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(DatasetError::InvalidGrid(format!(
                "mu must lie in (0, 1), got {mu}"
            )));
        }
        Ok(EpsilonGrid {
            values,
            epsilon2,
            mu,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn epsilon2(&self) -> f64 {
        self.epsilon2
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn num_classes(&self) -> usize {
        self.values.len()
    }

    pub fn epsilon_for_class(&self, class: usize) -> Option<f64> {
        class
            .checked_sub(1)
            .and_then(|k| self.values.get(k).copied())
    }

    /// `(class, epsilon1)` pairs in grid order.
    pub fn classes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &e)| (k + 1, e))
    }
}

/// Outcome of one two-stage run during labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub class: usize,
    pub epsilon1: f64,
    pub n1: usize,
    pub n2: usize,
    pub cost: f64,
    pub stage1_status: SolveStatus,
}

/// Binary64-only solve from zero; not a grid option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCost {
    pub n2: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub matrix_id: String,
    pub group_id: String,
    pub origin: Option<MatrixOrigin>,
    pub features: FeatureVector,
    /// One entry per grid value, in grid order.
    pub costs: Vec<CostEntry>,
    pub baseline: Option<BaselineCost>,
    /// Optimal class; 0 for invalid records.
    pub label: usize,
    pub i_opt: f64,
    /// Largest cost over the grid.
    pub i_wrst: f64,
    pub valid: bool,
    pub failure: Option<String>,
}

impl SampleRecord {
    pub fn cost_for_class(&self, class: usize) -> Option<f64> {
        self.costs.iter().find(|c| c.class == class).map(|c| c.cost)
    }
}
