//! Conjugate gradient solvers and the two-stage mixed-precision driver.
//!
//! Both `cg` and `pcg_jacobi` follow the textbook recurrence
//! (`alpha`, `x`, `r`, `beta`, `d` in that order) in the arithmetic of the
//! matrix element type. The stopping test is evaluated on the true residual
//! `b - A x_i`, recomputed every iteration, never on the recursive `r_i`.
//!
//! `two_stage_solve` runs CG on the binary32 copy of the system from a zero
//! start to tolerance `epsilon1`, widens the iterate, and finishes in binary64
//! to `epsilon2`. Its cost is `mu * n1 + n2`, counting stage-2 iterations as
//! the unit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{
    dot, downcast_vector, norm2, upcast_vector, Real, ReducedMatrix, SparseError, SparseSymMatrix,
    SymCsr,
};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("breakdown at iteration {iteration}: d^T A d = {curvature} is not positive")]
    BreakdownDivisionByZero { iteration: usize, curvature: f64 },
    #[error("diagonal entry {row} is not positive")]
    NonpositiveDiagonal { row: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stage 2 did not converge within {iterations} iterations (residual {residual:e})")]
    Stage2NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
}

/// Whether the stopping test divides the residual norm by `||b||`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualMode {
    #[default]
    Relative,
    Absolute,
}

/// Early exit when the best true residual stops improving: the run stops once
/// `window` iterations pass without the residual dropping below
/// `factor` times the last accepted level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stagnation {
    pub window: usize,
    pub factor: f64,
}

impl Default for Stagnation {
    fn default() -> Self {
        Stagnation {
            window: 25,
            factor: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub tolerance: f64,
    /// `None` means `10 * n`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
    pub residual_mode: ResidualMode,
    pub stagnation: Option<Stagnation>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tolerance: 1e-10,
            max_iterations: None,
            preconditioner: Preconditioner::None,
            residual_mode: ResidualMode::Relative,
            stagnation: Some(Stagnation::default()),
        }
    }
}

impl SolveConfig {
    pub fn with_tolerance(&self, tolerance: f64) -> Self {
        SolveConfig {
            tolerance,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tolerance > 0.0) {
            return Err(SolveError::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(SolveError::InvalidArgument(
                "max_iterations must be positive".into(),
            ));
        }
        if let Some(s) = self.stagnation {
            if s.window == 0 {
                return Err(SolveError::InvalidArgument(
                    "stagnation window must be at least 1".into(),
                ));
            }
            if !(s.factor > 0.0 && s.factor <= 1.0) {
                return Err(SolveError::InvalidArgument(format!(
                    "stagnation factor must lie in (0, 1], got {}",
                    s.factor
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Stagnated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Residual at the returned iterate, in the configured mode.
    pub final_residual_norm: f64,
    pub status: SolveStatus,
    /// Residual after each iteration; `residual_history.len() == iterations`.
    pub residual_history: Vec<f64>,
}

/// Plain conjugate gradient.
pub fn cg<T: Real>(
    a: &SymCsr<T>,
    b: &[T],
    x0: &[T],
    config: &SolveConfig,
) -> Result<SolveResult<T>, SolveError> {
    run(a, b, x0, config, None)
}

/// Conjugate gradient preconditioned with `M = diag(A)`.
pub fn pcg_jacobi<T: Real>(
    a: &SymCsr<T>,
    b: &[T],
    x0: &[T],
    config: &SolveConfig,
) -> Result<SolveResult<T>, SolveError> {
    let inv_diag = jacobi_inverse(a)?;
    run(a, b, x0, config, Some(&inv_diag))
}

/// Dispatches on `config.preconditioner`.
pub fn solve<T: Real>(
    a: &SymCsr<T>,
    b: &[T],
    x0: &[T],
    config: &SolveConfig,
) -> Result<SolveResult<T>, SolveError> {
    match config.preconditioner {
        Preconditioner::None => cg(a, b, x0, config),
        Preconditioner::Jacobi => pcg_jacobi(a, b, x0, config),
    }
}

fn jacobi_inverse<T: Real>(a: &SymCsr<T>) -> Result<Vec<T>, SolveError> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(row, d)| {
            if d > T::zero() {
                Ok(T::one() / d)
            } else {
                Err(SolveError::NonpositiveDiagonal { row })
            }
        })
        .collect()
}

fn run<T: Real>(
    a: &SymCsr<T>,
    b: &[T],
    x0: &[T],
    config: &SolveConfig,
    inv_diag: Option<&[T]>,
) -> Result<SolveResult<T>, SolveError> {
    config.validate()?;
    let n = a.n();
    for len in [b.len(), x0.len()] {
        if len != n {
            return Err(SolveError::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let max_iterations = config.max_iterations.unwrap_or(10 * n);
    let scale = match config.residual_mode {
        ResidualMode::Relative => {
            let nb = norm2(b).to_f64();
            // b = 0: measure the residual absolutely
            if nb > 0.0 {
                nb
            } else {
                1.0
            }
        }
        ResidualMode::Absolute => 1.0,
    };
    let precondition = |r: &[T], z: &mut [T]| match inv_diag {
        Some(m) => z
            .iter_mut()
            .zip(r.iter().zip(m))
            .for_each(|(zi, (&ri, &mi))| *zi = ri * mi),
        None => z.copy_from_slice(r),
    };

    let mut x = x0.to_vec();
    let mut ad = vec![T::zero(); n];
    let mut r = vec![T::zero(); n];
    a.apply(&x, &mut ad);
    for ((ri, &bi), &axi) in r.iter_mut().zip(b).zip(&ad) {
        *ri = bi - axi;
    }
    let mut z = vec![T::zero(); n];
    precondition(&r, &mut z);
    let mut d = z.clone();
    let mut rho = dot(&r, &z);

    let mut true_r = vec![T::zero(); n];
    let mut residual = norm2(&r).to_f64() / scale;
    let mut history = Vec::new();
    let mut iterations = 0usize;
    let mut anchor = residual;
    let mut anchor_iteration = 0usize;

    let status = loop {
        if residual <= config.tolerance {
            break SolveStatus::Converged;
        }
        if iterations >= max_iterations {
            break SolveStatus::MaxIterations;
        }
        if let Some(s) = config.stagnation {
            if iterations - anchor_iteration >= s.window {
                break SolveStatus::Stagnated;
            }
        }
        // Recursive residual exhausted below the normal range: no usable
        // search direction is left at this precision.
        if rho < T::min_positive_value() {
            break SolveStatus::Stagnated;
        }

        a.apply(&d, &mut ad);
        let curvature = dot(&d, &ad);
        if !(curvature > T::zero()) {
            return Err(SolveError::BreakdownDivisionByZero {
                iteration: iterations,
                curvature: curvature.to_f64(),
            });
        }
        let alpha = rho / curvature;
        for (xi, &di) in x.iter_mut().zip(&d) {
            *xi = *xi + alpha * di;
        }
        for (ri, &adi) in r.iter_mut().zip(&ad) {
            *ri = *ri - alpha * adi;
        }
        precondition(&r, &mut z);
        let rho_next = dot(&r, &z);
        let beta = rho_next / rho;
        for (di, &zi) in d.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
        rho = rho_next;
        iterations += 1;

        a.apply(&x, &mut true_r);
        for (ti, &bi) in true_r.iter_mut().zip(b) {
            *ti = bi - *ti;
        }
        residual = norm2(&true_r).to_f64() / scale;
        history.push(residual);
        if let Some(s) = config.stagnation {
            if residual < anchor * s.factor {
                anchor = residual;
                anchor_iteration = iterations;
            }
        }
    };

    Ok(SolveResult {
        x,
        iterations,
        final_residual_norm: residual,
        status,
        residual_history: history,
    })
}

/// Weighted iteration count `mu * n1 + n2`.
#[inline]
pub fn cost(n1: usize, n2: usize, mu: f64) -> f64 {
    mu * n1 as f64 + n2 as f64
}

/// Upper estimate `ceil(sqrt(kappa) / 2 * ln(2 / epsilon))` of the CG
/// iterations needed to reduce the A-norm error by `epsilon`.
pub fn iteration_bound(kappa: f64, epsilon: f64) -> Result<usize, SolveError> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(SolveError::InvalidArgument(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(SolveError::InvalidArgument(format!(
            "epsilon must lie in (0, 2), got {epsilon}"
        )));
    }
    Ok((0.5 * kappa.sqrt() * (2.0 / epsilon).ln()).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub x: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub mu: f64,
    pub cost: f64,
    pub stage1_status: SolveStatus,
    pub stage2_status: SolveStatus,
    /// Stage-2 residual at the returned iterate, in the configured mode.
    pub final_residual: f64,
}

/// A system prepared for repeated two-stage solves: the binary32 copies of
/// `A` and `b` are built once.
#[derive(Debug, Clone)]
pub struct TwoStageSolver<'a> {
    a: &'a SparseSymMatrix,
    b: &'a [f64],
    reduced: ReducedMatrix,
    reduced_b: Vec<f32>,
}

impl<'a> TwoStageSolver<'a> {
    pub fn new(a: &'a SparseSymMatrix, b: &'a [f64]) -> Result<Self, SolveError> {
        if b.len() != a.n() {
            return Err(SolveError::DimensionMismatch {
                expected: a.n(),
                found: b.len(),
            });
        }
        Ok(TwoStageSolver {
            a,
            b,
            reduced: a.downcast()?,
            reduced_b: downcast_vector(b)?,
        })
    }

    pub fn solve(
        &self,
        epsilon1: f64,
        epsilon2: f64,
        mu: f64,
        config: &SolveConfig,
    ) -> Result<TwoStageResult, SolveError> {
        if !(epsilon2 > 0.0) || !(epsilon2 <= epsilon1) {
            return Err(SolveError::InvalidArgument(format!(
                "need 0 < epsilon2 <= epsilon1, got epsilon1 = {epsilon1}, epsilon2 = {epsilon2}"
            )));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(SolveError::InvalidArgument(format!(
                "mu must lie in (0, 1), got {mu}"
            )));
        }

        let zero = vec![0.0f32; self.a.n()];
        let stage1 = solve(
            &self.reduced,
            &self.reduced_b,
            &zero,
            &config.with_tolerance(epsilon1),
        )?;
        let x0 = upcast_vector(&stage1.x);

        let stage2_config = SolveConfig {
            tolerance: epsilon2,
            stagnation: None,
            ..config.clone()
        };
        let stage2 = solve(self.a, self.b, &x0, &stage2_config)?;
        if stage2.status != SolveStatus::Converged {
            return Err(SolveError::Stage2NotConverged {
                iterations: stage2.iterations,
                residual: stage2.final_residual_norm,
            });
        }
        Ok(TwoStageResult {
            n1: stage1.iterations,
            n2: stage2.iterations,
            epsilon1,
            epsilon2,
            mu,
            cost: cost(stage1.iterations, stage2.iterations, mu),
            stage1_status: stage1.status,
            stage2_status: stage2.status,
            final_residual: stage2.final_residual_norm,
            x: stage2.x,
        })
    }

    /// Binary64-only solve from a zero start; the baseline the two-stage
    /// scheme competes against.
    pub fn solve_double(
        &self,
        epsilon2: f64,
        config: &SolveConfig,
    ) -> Result<SolveResult<f64>, SolveError> {
        let stage2_config = SolveConfig {
            tolerance: epsilon2,
            stagnation: None,
            ..config.clone()
        };
        let result = solve(self.a, self.b, &vec![0.0; self.a.n()], &stage2_config)?;
        if result.status != SolveStatus::Converged {
            return Err(SolveError::Stage2NotConverged {
                iterations: result.iterations,
                residual: result.final_residual_norm,
            });
        }
        Ok(result)
    }
}

/// Two-stage mixed-precision solve of `A x = b`.
///
/// Stage 1 stagnation is not an error: its last iterate still seeds stage 2.
pub fn two_stage_solve(
    a: &SparseSymMatrix,
    b: &[f64],
    epsilon1: f64,
    epsilon2: f64,
    mu: f64,
    config: &SolveConfig,
) -> Result<TwoStageResult, SolveError> {
    TwoStageSolver::new(a, b)?.solve(epsilon1, epsilon2, mu, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Symmetry;

    fn diag(values: &[f64]) -> SparseSymMatrix {
        let t: Vec<_> = values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        SparseSymMatrix::from_coordinates(values.len(), &t, Symmetry::Full).unwrap()
    }

    fn tight(tol: f64) -> SolveConfig {
        SolveConfig {
            tolerance: tol,
            stagnation: None,
            ..SolveConfig::default()
        }
    }

    #[test]
    fn identity_converges_in_one_step() {
        let a = diag(&[1.0; 5]);
        let b = vec![1.0; 5];
        let r = cg(&a, &b, &[0.0; 5], &tight(1e-12)).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.x, b);
        assert_eq!(r.residual_history.len(), 1);
    }

    #[test]
    fn diagonal_three_distinct_values() {
        let a = diag(&[1.0, 2.0, 3.0]);
        let cfg = tight(1e-12);
        let r = cg(&a, &[1.0, 1.0, 1.0], &[0.0; 3], &cfg).unwrap();
        assert!(r.iterations <= 3);
        assert_eq!(r.status, SolveStatus::Converged);
        for (xi, exact) in r.x.iter().zip([1.0, 0.5, 1.0 / 3.0]) {
            assert!((xi - exact).abs() < 1e-12);
        }
        assert!(r.final_residual_norm <= cfg.tolerance);
    }

    #[test]
    fn indefinite_matrix_breaks_down() {
        let a = SparseSymMatrix::from_coordinates(2, &[(0, 0, 1.0), (1, 1, -1.0)], Symmetry::Full)
            .unwrap();
        let err = cg(&a, &[1.0, 1.0], &[0.0, 0.0], &tight(1e-10)).unwrap_err();
        assert!(matches!(
            err,
            SolveError::BreakdownDivisionByZero { iteration: 0, .. }
        ));
        let err = cg(&a, &[1.0, 2.0], &[0.0, 0.0], &tight(1e-10)).unwrap_err();
        assert!(matches!(
            err,
            SolveError::BreakdownDivisionByZero { iteration: 0, .. }
        ));
    }

    #[test]
    fn jacobi_on_diagonal_is_exact() {
        let a = diag(&[4.0, 9.0]);
        let r = pcg_jacobi(&a, &[4.0, 9.0], &[0.0, 0.0], &tight(1e-12)).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, vec![1.0, 1.0]);
    }

    #[test]
    fn jacobi_rejects_nonpositive_diagonal() {
        let a = SparseSymMatrix::from_coordinates(2, &[(0, 0, 1.0), (1, 1, -1.0)], Symmetry::Full)
            .unwrap();
        let err = pcg_jacobi(&a, &[1.0, 1.0], &[0.0, 0.0], &tight(1e-10)).unwrap_err();
        assert!(matches!(err, SolveError::NonpositiveDiagonal { row: 1 }));
    }

    #[test]
    fn unit_diagonal_pcg_matches_cg_exactly() {
        let a = SparseSymMatrix::from_coordinates(
            3,
            &[
                (0, 0, 1.0),
                (1, 1, 1.0),
                (2, 2, 1.0),
                (1, 0, 0.3),
                (2, 1, -0.2),
            ],
            Symmetry::Mirror,
        )
        .unwrap();
        let b = [1.0, -2.0, 0.5];
        let p = cg(&a, &b, &[0.0; 3], &tight(1e-14)).unwrap();
        let q = pcg_jacobi(&a, &b, &[0.0; 3], &tight(1e-14)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn mismatched_lengths() {
        let a = diag(&[1.0, 1.0]);
        assert!(matches!(
            cg(&a, &[1.0], &[0.0, 0.0], &tight(1e-3)),
            Err(SolveError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig::default()
            .with_tolerance(0.0)
            .validate()
            .is_err());
        let c = SolveConfig {
            stagnation: Some(Stagnation {
                window: 0,
                factor: 0.5,
            }),
            ..SolveConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SolveConfig {
            stagnation: Some(Stagnation {
                window: 3,
                factor: 1.5,
            }),
            ..SolveConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(SolveConfig::default().validate().is_ok());
    }

    #[test]
    fn max_iterations_status() {
        let a = diag(&[1.0, 2.0, 3.0, 4.0]);
        let cfg = SolveConfig {
            max_iterations: Some(2),
            ..tight(1e-14)
        };
        let r = cg(&a, &[1.0; 4], &[0.0; 4], &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::MaxIterations);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn absolute_mode_uses_raw_norm() {
        let a = diag(&[1.0, 1.0]);
        let cfg = SolveConfig {
            residual_mode: ResidualMode::Absolute,
            tolerance: 3.0,
            ..tight(1.0)
        };
        // ||b|| = sqrt(8) < 3: already converged at x0 = 0
        let r = cg(&a, &[2.0, 2.0], &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(r.iterations, 0);
        let cfg = SolveConfig {
            tolerance: 0.5,
            ..cfg
        };
        let r = cg(&a, &[2.0, 2.0], &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn cost_formula() {
        assert_eq!(cost(0, 7, 0.5), 7.0);
        assert_eq!(cost(10, 4, 0.5), 9.0);
        assert_eq!(cost(6, 0, 0.25), 1.5);
    }

    #[test]
    fn iteration_bound_values() {
        assert_eq!(iteration_bound(1.0, 1.0).unwrap(), 1);
        // 5 * ln(2e10) = 118.5944...
        assert_eq!(iteration_bound(100.0, 1e-10).unwrap(), 119);
        assert!(iteration_bound(0.5, 0.1).is_err());
        assert!(iteration_bound(2.0, 0.0).is_err());
        assert!(iteration_bound(2.0, 2.0).is_err());
    }

    #[test]
    fn two_stage_identity() {
        let a = diag(&[1.0; 6]);
        let b = vec![1.0; 6];
        let r = two_stage_solve(&a, &b, 0.1, 1e-10, 0.5, &SolveConfig::default()).unwrap();
        assert_eq!(r.n1, 1);
        assert!(r.n2 <= 1);
        assert!(r.final_residual <= 1e-10);
        assert_eq!(r.cost, 0.5 * r.n1 as f64 + r.n2 as f64);
    }

    #[test]
    fn loose_stage1_degenerates_to_double() {
        let a = diag(&[1.0, 2.0, 3.0]);
        let b = vec![1.0, 1.0, 1.0];
        let r = two_stage_solve(&a, &b, 1.0, 1e-10, 0.5, &SolveConfig::default()).unwrap();
        assert_eq!(r.n1, 0);
        let base = TwoStageSolver::new(&a, &b)
            .unwrap()
            .solve_double(1e-10, &SolveConfig::default())
            .unwrap();
        assert_eq!(r.n2, base.iterations);
        assert_eq!(r.x, base.x);
    }

    #[test]
    fn two_stage_argument_checks() {
        let a = diag(&[1.0, 2.0]);
        let b = vec![1.0, 1.0];
        let cfg = SolveConfig::default();
        assert!(matches!(
            two_stage_solve(&a, &b, 1e-12, 1e-10, 0.5, &cfg),
            Err(SolveError::InvalidArgument(_))
        ));
        assert!(matches!(
            two_stage_solve(&a, &b, 0.1, 1e-10, 1.0, &cfg),
            Err(SolveError::InvalidArgument(_))
        ));
        let big = diag(&[1e39, 1.0]);
        assert!(matches!(
            two_stage_solve(&big, &b, 0.1, 1e-10, 0.5, &cfg),
            Err(SolveError::Sparse(SparseError::OverflowToInfinity { .. }))
        ));
    }

    #[test]
    fn stage2_budget_exhaustion_is_an_error() {
        let a = diag(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let cfg = SolveConfig {
            max_iterations: Some(2),
            ..SolveConfig::default()
        };
        let err = two_stage_solve(&a, &[1.0; 5], 1.0, 1e-10, 0.5, &cfg).unwrap_err();
        assert!(matches!(
            err,
            SolveError::Stage2NotConverged { iterations: 2, .. }
        ));
    }

    #[test]
    fn stage1_stagnation_still_seeds_stage2() {
        // path graph, diagonal 2.1: well posed but beyond binary32 at 1e-12
        let n = 60;
        let mut t: Vec<_> = (0..n).map(|i| (i, i, 2.1)).collect();
        t.extend((1..n).map(|i| (i, i - 1, 1.0)));
        let a = SparseSymMatrix::from_coordinates(n, &t, Symmetry::Mirror).unwrap();
        let b = a.spmv(&vec![1.0; n]).unwrap();
        let r = two_stage_solve(&a, &b, 1e-12, 1e-12, 0.5, &SolveConfig::default()).unwrap();
        assert_eq!(r.stage1_status, SolveStatus::Stagnated);
        assert_eq!(r.stage2_status, SolveStatus::Converged);
        assert!(r.final_residual <= 1e-12);
    }
}
