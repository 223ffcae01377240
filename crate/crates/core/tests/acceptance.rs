//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p mpcg --test acceptance`. Exits non-zero if any
//! criterion fails.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mpcg::dataset::{
    build_sample, generate, perturb, read_sample, write_manifest, EpsilonGrid, PlanEntry,
    SamplePlan,
};
use mpcg::features::{eigen_estimates, pseudo_diameter};
use mpcg::regression::{evaluate, split, EvalReport, KnnModel, SplitMode};
use mpcg::solver::iteration_bound;
use mpcg::{cg, SampleRecord, SolveConfig, SolveStatus, SparseSymMatrix, Symmetry, TwoStageSolver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const EIGEN_TOL: f64 = 1e-9;
const CG_EPS: f64 = 1e-8;
const EPS2: f64 = 1e-10;
const BENEFIT_RATIO: f64 = 0.97;
const NEAR_OPTIMAL: f64 = 0.10;
const DESK_MATRICES: usize = 550;
const DESK_SEED: u64 = 2024;
const SPLIT_SEED: u64 = 7;
const TEST_FRACTION: f64 = 0.1;
const K: usize = 5;

// Full-scale reference totals (1000 test matrices of order 1000), printed for comparison.
const REFERENCE_RATIO: f64 = 0.86;
const REFERENCE_KNN_MINUS_OPT: f64 = 180.0;
const REFERENCE_WRST_MINUS_KNN: f64 = 5048.0;
const REFERENCE_N_WRST: f64 = 38864.0;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn check(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn within(limit: Duration, start: Instant, mut outcome: Outcome) -> Outcome {
    let elapsed = start.elapsed();
    if elapsed > limit {
        outcome.passed = false;
    }
    outcome.detail = format!(
        "{}; {:.2}s of {}s",
        outcome.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    outcome
}

fn gershgorin_containment() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut matrices: Vec<SparseSymMatrix> = (0..150)
        .map(|_| generate(&common::random_spec(&mut rng, 2, 50)).unwrap())
        .collect();
    matrices.extend((0..150).map(|_| {
        let n = rng.gen_range(1..=50);
        let density = rng.gen_range(0.0..0.6);
        common::random_dominant(&mut rng, n, density)
    }));
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    for a in &matrices {
        let est = eigen_estimates(a).unwrap();
        let ev = common::eigenvalues(a);
        worst = worst
            .max(est.combined.lo - ev[0])
            .max(ev[ev.len() - 1] - est.combined.hi);
        let inside = ev.iter().all(|&e| est.combined.contains(e, EIGEN_TOL));
        if !inside || !est.combined.is_subset_of(&est.basic, EIGEN_TOL) {
            failures += 1;
        }
    }
    within(
        Duration::from_secs(10),
        start,
        Outcome::check(
            failures == 0,
            format!(
                "{} matrices, {failures} violations, largest excursion {worst:.3e}",
                matrices.len()
            ),
        ),
    )
}

fn pseudo_diameter_bound() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut graphs, mut trees, mut failures) = (0, 0, 0);
    for _ in 0..300 {
        let a = generate(&common::random_spec(&mut rng, 2, 200)).unwrap();
        let (est, exact) = (pseudo_diameter(&a), common::diameter(&a));
        graphs += 1;
        let tree = common::is_tree(&a);
        trees += tree as usize;
        if est > exact || (tree && est != exact) {
            failures += 1;
        }
    }
    within(
        Duration::from_secs(10),
        start,
        Outcome::check(
            failures == 0 && trees > 0,
            format!("{graphs} graphs ({trees} trees), {failures} violations"),
        ),
    )
}

fn cg_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = SolveConfig::default().with_tolerance(CG_EPS);
    let mut failures = Vec::new();
    for inst in 0..60 {
        let k = rng.gen_range(1..=10);
        let n = rng.gen_range(k..=50);
        let distinct: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..100.0)).collect();
        let t: Vec<_> = (0..n).map(|i| (i, i, distinct[i % k])).collect();
        let a = SparseSymMatrix::from_coordinates(n, &t, Symmetry::Full).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = cg(&a, &b, &vec![0.0; n], &config).unwrap();
        if r.status != SolveStatus::Converged || r.iterations > k + 2 {
            failures.push(format!(
                "diagonal #{inst}: k = {k}, {} iterations",
                r.iterations
            ));
        }
    }
    let mut slack = usize::MAX;
    for inst in 0..60 {
        let n = rng.gen_range(2..=50);
        let density = rng.gen_range(0.05..0.5);
        let a = common::random_dominant(&mut rng, n, density);
        let b = a.spmv(&vec![1.0; n]).unwrap();
        let r = cg(&a, &b, &vec![0.0; n], &config).unwrap();
        let bound = iteration_bound(common::condition_number(&a), CG_EPS).unwrap();
        slack = slack.min(bound.saturating_sub(r.iterations));
        if r.status != SolveStatus::Converged || r.iterations > bound {
            failures.push(format!(
                "dominant #{inst}: {} iterations, bound {bound}",
                r.iterations
            ));
        }
    }
    within(
        Duration::from_secs(5),
        start,
        Outcome::check(
            failures.is_empty(),
            format!("120 instances, smallest bound slack {slack}, failures {failures:?}"),
        ),
    )
}

/// Matrices of a plan, built with the public generators.
fn plan_matrices(plan: &SamplePlan) -> Vec<SparseSymMatrix> {
    plan.entries
        .par_iter()
        .flat_map_iter(|entry| match entry {
            PlanEntry::Single { spec } => vec![generate(spec).unwrap()],
            PlanEntry::Group {
                base,
                variants,
                edges_to_add,
                seed,
            } => {
                let a = generate(base).unwrap();
                let add = edges_to_add.unwrap_or((a.nnz() / 100).max(1));
                let mut all = perturb(&a, &base.diagonal, *variants, add, *seed).unwrap();
                all.insert(0, a);
                all
            }
        })
        .collect()
}

fn two_stage_accuracy() -> Outcome {
    let start = Instant::now();
    let plan = SamplePlan::desk(100, 200, 1000, 4).unwrap();
    let grid = EpsilonGrid::default();
    let config = SolveConfig::default();
    let matrices = plan_matrices(&plan);
    let per_matrix: Vec<(usize, usize, f64)> = matrices
        .par_iter()
        .map(|a| {
            let b = a.spmv(&vec![1.0; a.n()]).unwrap();
            let solver = TwoStageSolver::new(a, &b).unwrap();
            let (mut converged, mut bad, mut worst) = (0, 0, 0.0f64);
            for (_, e1) in grid.classes() {
                let r = solver
                    .solve(e1, grid.epsilon2(), grid.mu(), &config)
                    .unwrap();
                if r.stage2_status == SolveStatus::Converged {
                    converged += 1;
                    let y = a.spmv(&r.x).unwrap();
                    let diff: Vec<f64> = b.iter().zip(&y).map(|(p, q)| p - q).collect();
                    let rel = mpcg::sparse::norm2(&diff) / mpcg::sparse::norm2(&b);
                    worst = worst.max(rel);
                    bad += (rel > EPS2) as usize;
                }
            }
            (converged, bad, worst)
        })
        .collect();
    let converged: usize = per_matrix.iter().map(|p| p.0).sum();
    let bad: usize = per_matrix.iter().map(|p| p.1).sum();
    let worst = per_matrix.iter().map(|p| p.2).fold(0.0, f64::max);
    within(
        Duration::from_secs(600),
        start,
        Outcome::check(
            bad == 0 && converged > 0,
            format!(
                "{} matrices, {converged} converged solves, {bad} above {EPS2:e}, largest {worst:.3e}",
                matrices.len()
            ),
        ),
    )
}

struct Pipeline {
    records: Vec<SampleRecord>,
    train: Vec<usize>,
    report: EvalReport,
    files: Vec<PathBuf>,
}

fn run_pipeline(dir: &Path) -> Pipeline {
    let grid = EpsilonGrid::default();
    let config = SolveConfig::default();
    let plan = SamplePlan::desk(DESK_MATRICES, 200, 1000, DESK_SEED).unwrap();
    let sample = dir.join("sample.jsonl");
    let manifest = build_sample(&plan, &grid, &config, &sample).unwrap();
    write_manifest(&manifest, &dir.join("manifest.json")).unwrap();
    let records = read_sample(&sample).unwrap();
    let s = split(&records, TEST_FRACTION, SPLIT_SEED, SplitMode::Group).unwrap();
    let train: Vec<&SampleRecord> = s.train.iter().map(|&i| &records[i]).collect();
    let test: Vec<&SampleRecord> = s.test.iter().map(|&i| &records[i]).collect();
    let model = KnnModel::fit(&train, K, &grid).unwrap();
    model.save(&dir.join("model.json")).unwrap();
    let report = evaluate(&model, &test).unwrap();
    report.write(&dir.join("report")).unwrap();
    let files = [
        "sample.jsonl",
        "manifest.json",
        "model.json",
        "report.txt",
        "report.json",
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    Pipeline {
        records,
        train: s.train,
        report,
        files,
    }
}

fn ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn cost_ordering(reports: &[&EvalReport]) -> Outcome {
    let entries: usize = reports.iter().map(|r| r.entries.len()).sum();
    let bad = reports.iter().filter(|r| !r.ordering_holds()).count();
    Outcome::check(
        bad == 0 && entries > 0,
        format!(
            "{} reports, {entries} test matrices, {bad} violations",
            reports.len()
        ),
    )
}

fn desk_reproduction(p: &Pipeline, start: Instant) -> Outcome {
    let r = &p.report;
    let valid = p.records.iter().filter(|r| r.valid).count();
    let structured = p
        .records
        .iter()
        .filter(|r| r.origin.as_ref().is_some_and(|o| !is_group(o)))
        .count();
    let benefit = r.n_knn <= BENEFIT_RATIO * r.n_wrst;
    let near = r.knn_minus_opt <= NEAR_OPTIMAL * r.n_opt;
    within(
        Duration::from_secs(1800),
        start,
        Outcome::check(
            valid >= 500 && benefit && near,
            format!(
                "{} records ({valid} valid, {structured} structured), {} test; \
                 N_Opt/N_Wrst {} (reference {REFERENCE_RATIO}), N_kNN/N_Wrst {} (reference {REFERENCE_RATIO}), \
                 N_kNN-N_Opt {} = {:.4} of N_Opt (reference {REFERENCE_KNN_MINUS_OPT}), \
                 N_Wrst-N_kNN {} (reference {REFERENCE_WRST_MINUS_KNN}), N_Wrst {} (reference {REFERENCE_N_WRST})",
                p.records.len(),
                r.entries.len(),
                ratio(r.opt_over_wrst),
                ratio(r.knn_over_wrst),
                r.knn_minus_opt,
                r.knn_minus_opt / r.n_opt,
                r.wrst_minus_knn,
                r.n_wrst,
            ),
        ),
    )
}

fn is_group(origin: &mpcg::dataset::MatrixOrigin) -> bool {
    matches!(
        origin.spec.family,
        mpcg::dataset::GraphFamily::RandomGnm { .. }
    )
}

fn self_consistency(p: &Pipeline) -> (Outcome, EvalReport) {
    let train: Vec<&SampleRecord> = p.train.iter().map(|&i| &p.records[i]).collect();
    let model = KnnModel::fit(&train, 1, &EpsilonGrid::default()).unwrap();
    let report = evaluate(&model, &train).unwrap();
    let outcome = Outcome::check(
        report.n_knn == report.n_opt,
        format!(
            "{} training matrices, N_kNN {} vs N_Opt {}",
            report.entries.len(),
            report.n_knn,
            report.n_opt
        ),
    );
    (outcome, report)
}

fn determinism(first: &Pipeline, second: &Pipeline) -> Outcome {
    let differing: Vec<String> = first
        .files
        .iter()
        .zip(&second.files)
        .filter(|(a, b)| std::fs::read(a).unwrap() != std::fs::read(b).unwrap())
        .map(|(a, _)| a.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    Outcome::check(
        differing.is_empty(),
        format!(
            "{} files compared, differing: {differing:?}",
            first.files.len()
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, outcome: Outcome| {
        println!(
            "criterion {id} {} {name}: {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
        results.push((id, name, outcome));
    };

    report(1, "gershgorin containment", gershgorin_containment());
    report(2, "pseudo-diameter bound", pseudo_diameter_bound());
    report(3, "cg correctness", cg_correctness());
    report(4, "two-stage final accuracy", two_stage_accuracy());

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let start = Instant::now();
    let first = run_pipeline(dirs[0].path());
    let c6 = desk_reproduction(&first, start);
    let (c7, train_report) = self_consistency(&first);

    let mut extra = Vec::new();
    for (seed, k) in [(11, 1), (12, 3), (13, 7)] {
        let s = split(&first.records, TEST_FRACTION, seed, SplitMode::Record).unwrap();
        let train: Vec<&SampleRecord> = s.train.iter().map(|&i| &first.records[i]).collect();
        let test: Vec<&SampleRecord> = s.test.iter().map(|&i| &first.records[i]).collect();
        extra.push(
            evaluate(
                &KnnModel::fit(&train, k, &EpsilonGrid::default()).unwrap(),
                &test,
            )
            .unwrap(),
        );
    }
    let mut all: Vec<&EvalReport> = vec![&first.report, &train_report];
    all.extend(&extra);
    report(5, "cost ordering", cost_ordering(&all));
    report(6, "desk-scale cost reduction", c6);
    report(7, "k = 1 self-consistency", c7);

    let second = run_pipeline(dirs[1].path());
    report(8, "determinism", determinism(&first, &second));

    let failed: Vec<usize> = results
        .iter()
        .filter(|r| !r.2.passed)
        .map(|r| r.0)
        .collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
