//! Sample plans and the labeled sample file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate, perturb, DiagonalStrategy, GraphFamily, GraphSpec};
use super::label::{label_matrix, ones_rhs};
use super::{DatasetError, EpsilonGrid, SampleRecord};
use crate::solver::SolveConfig;
use crate::sparse::SparseSymMatrix;

pub const SAMPLE_FORMAT_VERSION: u32 = 1;

/// Matrices labeled concurrently before their records are appended.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanEntry {
    Single {
        spec: GraphSpec,
    },
    /// A base matrix followed by `variants` perturbed copies.
    Group {
        base: GraphSpec,
        variants: usize,
        /// Defaults to 1% of the base's stored nonzeros, at least 1.
        edges_to_add: Option<usize>,
        seed: u64,
    },
}

impl PlanEntry {
    pub fn len(&self) -> usize {
        match self {
            PlanEntry::Single { .. } => 1,
            PlanEntry::Group { variants, .. } => 1 + variants,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub seed: u64,
    pub entries: Vec<PlanEntry>,
}

/// Where a sample matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixOrigin {
    pub spec: GraphSpec,
    /// Variant index and edges added, for perturbed copies.
    pub variant: Option<usize>,
    pub edges_added: Option<usize>,
}

/// Picks a family for a requested size and returns the size actually used.
type FamilyPicker = fn(usize, &mut ChaCha8Rng) -> (GraphFamily, usize);

const STRUCTURED: [FamilyPicker; 6] = [
    |n, _| (GraphFamily::Path, n),
    |n, _| (GraphFamily::Cycle, n),
    |n, rng| {
        let rows = rng.gen_range(2..=(n as f64).sqrt() as usize);
        let cols = n / rows;
        (GraphFamily::Grid2d { cols }, rows * cols)
    },
    |n, _| (GraphFamily::Star, n),
    |n, _| (GraphFamily::TreeRandom, n),
    |n, rng| {
        let degree = rng.gen_range(3..=8);
        let n = if (degree * n) % 2 == 1 { n + 1 } else { n };
        (GraphFamily::RandomRegular { degree }, n)
    },
];

fn max_degree_of(family: &GraphFamily, n: usize) -> Option<usize> {
    match *family {
        GraphFamily::Path | GraphFamily::Cycle => Some(2),
        GraphFamily::Grid2d { .. } => Some(4),
        GraphFamily::Star => Some(n - 1),
        _ => None,
    }
}

impl SamplePlan {
    /// Mixed plan of about `total` matrices with dimensions in
    /// `[n_min, n_max]`: roughly 27% structured families with varied
    /// diagonals, the rest random `G(n, m)` graphs in groups of a base plus
    /// ten perturbed copies.
    pub fn desk(total: usize, n_min: usize, n_max: usize, seed: u64) -> Result<Self, DatasetError> {
        if n_min < 16 || n_min > n_max {
            return Err(DatasetError::InvalidSpec(format!(
                "dimension range [{n_min}, {n_max}] is invalid"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let structured = (0.27 * total as f64).round() as usize;
        let groups = if total > structured {
            ((total - structured) as f64 / 11.0).ceil() as usize
        } else {
            0
        };
        let mut entries = Vec::with_capacity(structured + groups);

        for k in 0..structured {
            let n = rng.gen_range(n_min..=n_max);
            let (family, n) = STRUCTURED[k % STRUCTURED.len()](n, &mut rng);
            let diagonal = match max_degree_of(&family, n) {
                Some(max_degree) if k % 2 == 0 => DiagonalStrategy::UniformConstant {
                    value: max_degree as f64 + rng.gen_range(0.1..4.0),
                },
                _ => DiagonalStrategy::DegreePlusDelta {
                    lo: 0.1,
                    hi: rng.gen_range(0.5..4.0),
                },
            };
            entries.push(PlanEntry::Single {
                spec: GraphSpec {
                    family,
                    n,
                    diagonal,
                    seed: rng.gen(),
                },
            });
        }
        for _ in 0..groups {
            let n = rng.gen_range(n_min..=n_max);
            let edges = (n as f64 * rng.gen_range(0.6..3.0)).round() as usize;
            entries.push(PlanEntry::Group {
                base: GraphSpec {
                    family: GraphFamily::RandomGnm { edges },
                    n,
                    diagonal: DiagonalStrategy::default(),
                    seed: rng.gen(),
                },
                variants: 10,
                edges_to_add: None,
                seed: rng.gen(),
            });
        }
        Ok(SamplePlan { seed, entries })
    }

    pub fn num_matrices(&self) -> usize {
        self.entries.iter().map(PlanEntry::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub plan_seed: u64,
    pub plan_entries: usize,
    pub planned_matrices: usize,
    pub records: usize,
    pub valid: usize,
    pub invalid: usize,
    pub skipped: usize,
    pub entry_seeds: Vec<u64>,
    pub grid: EpsilonGrid,
    pub solve_config: SolveConfig,
}

struct Job {
    matrix_id: String,
    group_id: String,
    origin: MatrixOrigin,
    matrix: SparseSymMatrix,
}

fn expand(index: usize, entry: &PlanEntry) -> Result<Vec<Job>, DatasetError> {
    let group_id = format!("g{index:05}");
    match entry {
        PlanEntry::Single { spec } => Ok(vec![Job {
            matrix_id: format!("{group_id}-0"),
            group_id,
            origin: MatrixOrigin {
                spec: *spec,
                variant: None,
                edges_added: None,
            },
            matrix: generate(spec)?,
        }]),
        PlanEntry::Group {
            base,
            variants,
            edges_to_add,
            seed,
        } => {
            let matrix = generate(base)?;
            let edges = edges_to_add.unwrap_or_else(|| (matrix.nnz() / 100).max(1));
            let copies = perturb(&matrix, &base.diagonal, *variants, edges, *seed)?;
            let mut jobs = vec![Job {
                matrix_id: format!("{group_id}-0"),
                group_id: group_id.clone(),
                origin: MatrixOrigin {
                    spec: *base,
                    variant: None,
                    edges_added: None,
                },
                matrix,
            }];
            jobs.extend(copies.into_iter().enumerate().map(|(v, matrix)| Job {
                matrix_id: format!("{group_id}-{}", v + 1),
                group_id: group_id.clone(),
                origin: MatrixOrigin {
                    spec: *base,
                    variant: Some(v),
                    edges_added: Some(edges),
                },
                matrix,
            }));
            Ok(jobs)
        }
    }
}

fn label_job(job: Job, grid: &EpsilonGrid, config: &SolveConfig) -> Option<SampleRecord> {
    let b = ones_rhs(&job.matrix);
    match label_matrix(&job.matrix_id, &job.matrix, &b, grid, config) {
        Ok(mut record) => {
            record.group_id = job.group_id;
            record.origin = Some(job.origin);
            Some(record)
        }
        Err(super::DatasetError::Solve(
            e @ crate::solver::SolveError::Stage2NotConverged { .. },
        )) => {
            warn!("{}: {e}; recorded as invalid", job.matrix_id);
            let features = crate::features::extract_features(&job.matrix).ok()?;
            Some(SampleRecord {
                matrix_id: job.matrix_id,
                group_id: job.group_id,
                origin: Some(job.origin),
                features,
                costs: Vec::new(),
                baseline: None,
                label: 0,
                i_opt: 0.0,
                i_wrst: 0.0,
                valid: false,
                failure: Some(e.to_string()),
            })
        }
        Err(e) => {
            warn!("{}: {e}; skipped", job.matrix_id);
            None
        }
    }
}

/// Generates and labels every matrix of `plan`, writing one JSON record per
/// line to `out_path` in plan order. Labeling runs on the current rayon pool;
/// the output does not depend on its size.
pub fn build_sample(
    plan: &SamplePlan,
    grid: &EpsilonGrid,
    config: &SolveConfig,
    out_path: &Path,
) -> Result<DatasetManifest, DatasetError> {
    let mut out = BufWriter::new(File::create(out_path)?);
    let (mut records, mut valid, mut skipped) = (0, 0, 0);
    let indexed: Vec<(usize, &PlanEntry)> = plan.entries.iter().enumerate().collect();
    for chunk in indexed.chunks(CHUNK) {
        let expanded: Vec<Result<Vec<Job>, DatasetError>> = chunk
            .par_iter()
            .map(|&(index, entry)| expand(index, entry))
            .collect();
        let mut jobs = Vec::new();
        for ((index, entry), result) in chunk.iter().zip(expanded) {
            match result {
                Ok(j) => jobs.extend(j),
                Err(e) => {
                    warn!("plan entry {index}: {e}; skipped");
                    skipped += entry.len();
                }
            }
        }
        let planned = jobs.len();
        let labeled: Vec<Option<SampleRecord>> = jobs
            .into_par_iter()
            .map(|job| label_job(job, grid, config))
            .collect();
        for record in labeled.iter().flatten() {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
            records += 1;
            valid += usize::from(record.valid);
        }
        skipped += planned - labeled.iter().flatten().count();
    }
    out.flush()?;
    Ok(DatasetManifest {
        format_version: SAMPLE_FORMAT_VERSION,
        plan_seed: plan.seed,
        plan_entries: plan.entries.len(),
        planned_matrices: plan.num_matrices(),
        records,
        valid,
        invalid: records - valid,
        skipped,
        entry_seeds: plan
            .entries
            .iter()
            .map(|e| match e {
                PlanEntry::Single { spec } => spec.seed,
                PlanEntry::Group { seed, .. } => *seed,
            })
            .collect(),
        grid: grid.clone(),
        solve_config: config.clone(),
    })
}

pub fn read_sample(path: &Path) -> Result<Vec<SampleRecord>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
