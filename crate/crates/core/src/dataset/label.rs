use super::{BaselineCost, CostEntry, DatasetError, EpsilonGrid, SampleRecord};
use crate::features::extract_features;
use crate::solver::{cost, SolveConfig, TwoStageSolver};
use crate::sparse::SparseSymMatrix;

/// `b = A * 1`, so the exact solution is the all-ones vector.
pub fn ones_rhs(a: &SparseSymMatrix) -> Vec<f64> {
    a.spmv(&vec![1.0; a.n()])
        .expect("length matches by construction")
}

/// Cheapest entry; equal costs go to the larger `epsilon1`. The result does
/// not depend on the order of `costs`.
pub fn select_label(costs: &[CostEntry]) -> Option<&CostEntry> {
    costs
        .iter()
        .fold(None, |best: Option<&CostEntry>, c| match best {
            Some(b) if b.cost < c.cost || (b.cost == c.cost && b.epsilon1 >= c.epsilon1) => Some(b),
            _ => Some(c),
        })
}

/// Runs the two-stage solver once per grid value plus the binary64 baseline
/// and records the costs, the optimal class, and the worst grid cost.
///
/// `group_id` is set to `matrix_id` and `origin` left empty; sample building
/// fills them in.
pub fn label_matrix(
    matrix_id: &str,
    a: &SparseSymMatrix,
    b: &[f64],
    grid: &EpsilonGrid,
    config: &SolveConfig,
) -> Result<SampleRecord, DatasetError> {
    let features = extract_features(a)?;
    let solver = TwoStageSolver::new(a, b)?;
    let mut costs = Vec::with_capacity(grid.num_classes());
    for (class, epsilon1) in grid.classes() {
        let r = solver.solve(epsilon1, grid.epsilon2(), grid.mu(), config)?;
        costs.push(CostEntry {
            class,
            epsilon1,
            n1: r.n1,
            n2: r.n2,
            cost: r.cost,
            stage1_status: r.stage1_status,
        });
    }
    let base = solver.solve_double(grid.epsilon2(), config)?;
    let best = select_label(&costs).ok_or(DatasetError::EmptyCosts)?;
    let (label, i_opt) = (best.class, best.cost);
    let i_wrst = costs
        .iter()
        .map(|c| c.cost)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SampleRecord {
        matrix_id: matrix_id.to_string(),
        group_id: matrix_id.to_string(),
        origin: None,
        features,
        costs,
        baseline: Some(BaselineCost {
            n2: base.iterations,
            cost: cost(0, base.iterations, grid.mu()),
        }),
        label,
        i_opt,
        i_wrst,
        valid: true,
        failure: None,
    })
}
