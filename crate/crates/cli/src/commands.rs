use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use mpcg::dataset::{build_sample, read_manifest, read_sample, write_manifest, SamplePlan};
use mpcg::features::eigen_estimates;
use mpcg::regression::{evaluate, split};
use mpcg::sparse::read_matrix_market;
use mpcg::{
    extract_features, two_stage_solve, EpsilonGrid, KnnModel, Preconditioner, ResidualMode,
    SampleRecord, SolveConfig, SplitMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::{Cli, Command, EvalSet, GlobalArgs, Precond, Residual, SplitBy};

pub const TRAIN_FORMAT_VERSION: u32 = 1;

/// Matrix ids on each side of a train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub test_fraction: f64,
    pub split_by: SplitMode,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub format_version: u32,
    pub seed: u64,
    pub k: usize,
    pub test_fraction: f64,
    pub split_by: SplitMode,
    pub records: usize,
    pub valid: usize,
    pub train: usize,
    pub test: usize,
    pub grid: EpsilonGrid,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Some(threads) = g.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let grid = grid(g)?;
    let config = solve_config(g)?;
    match &cli.command {
        Command::Features { matrix, json } => features(matrix, *json),
        Command::Solve {
            matrix,
            eps1,
            model,
            rhs,
            x_out,
        } => solve(
            g,
            &config,
            matrix,
            eps1,
            model.as_deref(),
            rhs,
            x_out.as_deref(),
        ),
        Command::Generate {
            matrices,
            n_min,
            n_max,
        } => {
            let plan = SamplePlan::desk(*matrices, *n_min, *n_max, g.seed)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let path = output(g, "plan.json")?;
            write_json(&path, &plan)?;
            println!(
                "{} entries, {} matrices -> {}",
                plan.entries.len(),
                plan.num_matrices(),
                path.display()
            );
            Ok(())
        }
        Command::Label { plan } => label(g, &grid, &config, plan),
        Command::Train {
            sample,
            k,
            test_fraction,
            split_by,
        } => train(g, &grid, sample, *k, *test_fraction, *split_by),
        Command::Evaluate {
            sample,
            model,
            split,
            set,
        } => evaluate_cmd(g, sample, model, split.as_deref(), *set),
    }
}

fn grid(g: &GlobalArgs) -> Result<EpsilonGrid, CliError> {
    EpsilonGrid::new(g.grid.clone(), g.eps2, g.mu).map_err(|e| CliError::Config(e.to_string()))
}

fn solve_config(g: &GlobalArgs) -> Result<SolveConfig, CliError> {
    let config = SolveConfig {
        max_iterations: g.max_iter,
        preconditioner: match g.precond {
            Precond::None => Preconditioner::None,
            Precond::Jacobi => Preconditioner::Jacobi,
        },
        residual_mode: match g.residual {
            Residual::Relative => ResidualMode::Relative,
            Residual::Absolute => ResidualMode::Absolute,
        },
        ..SolveConfig::default()
    };
    config.validate()?;
    Ok(config)
}

fn output(g: &GlobalArgs, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&g.out_dir).map_err(|e| CliError::io(&g.out_dir, e))?;
    Ok(g.out_dir.join(name))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> Result<mpcg::SparseSymMatrix, CliError> {
    read_matrix_market(path).map_err(|e| CliError::matrix(path, e))
}

fn load_model(path: Option<&Path>) -> Result<KnnModel, CliError> {
    let path = path.ok_or_else(|| CliError::MissingModel(PathBuf::from("(none given)")))?;
    if !path.exists() {
        return Err(CliError::MissingModel(path.to_path_buf()));
    }
    KnnModel::load(path).map_err(|e| CliError::regression(path, e))
}

fn load_sample(path: &Path) -> Result<Vec<SampleRecord>, CliError> {
    read_sample(path).map_err(|e| CliError::dataset(path, e))
}

fn features(path: &Path, json: bool) -> Result<(), CliError> {
    let a = load_matrix(path)?;
    let f =
        extract_features(&a).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let est =
        eigen_estimates(&a).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if json {
        let value = serde_json::json!({ "features": f, "intervals": est });
        println!("{value}");
        return Ok(());
    }
    let mut s = String::new();
    let _ = writeln!(s, "n                {}", f.n);
    let _ = writeln!(s, "m                {}", f.m);
    let _ = writeln!(s, "pseudo_diameter  {}", f.pseudo_diameter);
    let _ = writeln!(s, "spread           {}", f.spread);
    let _ = writeln!(s, "lambda_max       {}", f.lambda_max);
    for (name, i) in [
        ("basic", est.basic),
        ("scaled1", est.scaled1),
        ("scaled2", est.scaled2),
        ("combined", est.combined),
    ] {
        let _ = writeln!(s, "{name:<16} [{}, {}]", i.lo, i.hi);
    }
    print!("{s}");
    Ok(())
}

fn rhs(a: &mpcg::SparseSymMatrix, source: &str, seed: u64) -> Result<Vec<f64>, CliError> {
    match source {
        "ones" => Ok(mpcg::dataset::ones_rhs(a)),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..a.n()).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        }
        file => {
            let path = Path::new(file);
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let b = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .enumerate()
                .map(|(k, l)| {
                    l.parse::<f64>().map_err(|e| {
                        CliError::Config(format!("{}: value {}: {e}", path.display(), k + 1))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if b.len() != a.n() {
                return Err(CliError::Config(format!(
                    "{}: {} values for a matrix of order {}",
                    path.display(),
                    b.len(),
                    a.n()
                )));
            }
            Ok(b)
        }
    }
}

fn solve(
    g: &GlobalArgs,
    config: &SolveConfig,
    path: &Path,
    eps1: &str,
    model: Option<&Path>,
    rhs_source: &str,
    x_out: Option<&Path>,
) -> Result<(), CliError> {
    let numeric = if eps1 == "auto" {
        None
    } else {
        Some(eps1.parse::<f64>().map_err(|_| {
            CliError::Config(format!("--eps1 must be a number or `auto`, got {eps1}"))
        })?)
    };
    if let Some(e1) = numeric {
        if !(g.eps2 > 0.0 && g.eps2 <= e1) {
            return Err(CliError::Config(format!(
                "need 0 < eps2 <= eps1, got eps1 = {e1}, eps2 = {}",
                g.eps2
            )));
        }
    }
    let model = if numeric.is_none() {
        Some(load_model(model)?)
    } else {
        None
    };
    let a = load_matrix(path)?;
    let b = rhs(&a, rhs_source, g.seed)?;
    let e1 = match (numeric, &model) {
        (Some(e1), _) => e1,
        (None, Some(model)) => {
            let f = extract_features(&a)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let class = model.predict(&f);
            let e1 = model.grid.epsilon_for_class(class).ok_or_else(|| {
                CliError::Config(format!("model predicted class {class} outside its grid"))
            })?;
            println!("predicted class  {class}");
            if g.eps2 > e1 {
                return Err(CliError::Config(format!(
                    "predicted eps1 = {e1} is below eps2 = {}",
                    g.eps2
                )));
            }
            e1
        }
        (None, None) => unreachable!("auto mode always loads a model"),
    };
    let r = two_stage_solve(&a, &b, e1, g.eps2, g.mu, config)?;
    println!("eps1             {}", r.epsilon1);
    println!("eps2             {}", r.epsilon2);
    println!("n1               {}", r.n1);
    println!("n2               {}", r.n2);
    println!("cost             {}", r.cost);
    println!("stage1_status    {:?}", r.stage1_status);
    println!("final_residual   {:e}", r.final_residual);
    if let Some(out) = x_out {
        let mut text = String::with_capacity(r.x.len() * 24);
        for v in &r.x {
            let _ = writeln!(text, "{v:.16e}");
        }
        fs::write(out, text).map_err(|e| CliError::io(out, e))?;
    }
    Ok(())
}

fn label(
    g: &GlobalArgs,
    grid: &EpsilonGrid,
    config: &SolveConfig,
    plan_path: &Path,
) -> Result<(), CliError> {
    let plan: SamplePlan = read_json(plan_path)?;
    let sample = output(g, "sample.jsonl")?;
    let manifest =
        build_sample(&plan, grid, config, &sample).map_err(|e| CliError::dataset(&sample, e))?;
    let manifest_path = output(g, "manifest.json")?;
    write_manifest(&manifest, &manifest_path).map_err(|e| CliError::dataset(&manifest_path, e))?;
    println!(
        "{} records ({} valid, {} invalid, {} skipped) -> {}",
        manifest.records,
        manifest.valid,
        manifest.invalid,
        manifest.skipped,
        sample.display()
    );
    Ok(())
}

/// The grid a sample was labeled with, from the manifest beside it, or the
/// command-line grid if there is none.
fn sample_grid(sample: &Path, fallback: &EpsilonGrid) -> Result<EpsilonGrid, CliError> {
    let path = sample.with_file_name("manifest.json");
    if !path.exists() {
        return Ok(fallback.clone());
    }
    let manifest = read_manifest(&path).map_err(|e| CliError::dataset(&path, e))?;
    info!("using the grid recorded in {}", path.display());
    Ok(manifest.grid)
}

fn train(
    g: &GlobalArgs,
    grid: &EpsilonGrid,
    sample: &Path,
    k: usize,
    test_fraction: f64,
    split_by: SplitBy,
) -> Result<(), CliError> {
    let grid = sample_grid(sample, grid)?;
    let all = load_sample(sample)?;
    let records: Vec<SampleRecord> = all.iter().filter(|r| r.valid).cloned().collect();
    let mode = match split_by {
        SplitBy::Group => SplitMode::Group,
        SplitBy::Record => SplitMode::Record,
    };
    let s = split(&records, test_fraction, g.seed, mode)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let train: Vec<&SampleRecord> = s.train.iter().map(|&i| &records[i]).collect();
    let model = KnnModel::fit(&train, k, &grid).map_err(|e| CliError::regression(sample, e))?;

    let model_path = output(g, "model.json")?;
    model
        .save(&model_path)
        .map_err(|e| CliError::regression(&model_path, e))?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| records[i].matrix_id.clone()).collect();
    let split_file = SplitFile {
        seed: g.seed,
        test_fraction,
        split_by: mode,
        train: ids(&s.train),
        test: ids(&s.test),
    };
    write_json(&output(g, "split.json")?, &split_file)?;
    let manifest = TrainManifest {
        format_version: TRAIN_FORMAT_VERSION,
        seed: g.seed,
        k,
        test_fraction,
        split_by: mode,
        records: all.len(),
        valid: records.len(),
        train: s.train.len(),
        test: s.test.len(),
        grid,
    };
    write_json(&output(g, "train_manifest.json")?, &manifest)?;
    println!(
        "k = {k}, {} training and {} test matrices -> {}",
        s.train.len(),
        s.test.len(),
        model_path.display()
    );
    Ok(())
}

fn evaluate_cmd(
    g: &GlobalArgs,
    sample: &Path,
    model_path: &Path,
    split_path: Option<&Path>,
    set: EvalSet,
) -> Result<(), CliError> {
    let model = load_model(Some(model_path))?;
    let records = load_sample(sample)?;
    let selected: Vec<&SampleRecord> = match split_path {
        None => records.iter().filter(|r| r.valid).collect(),
        Some(path) => {
            let s: SplitFile = read_json(path)?;
            let ids: Vec<&String> = match set {
                EvalSet::Train => s.train.iter().collect(),
                EvalSet::Test => s.test.iter().collect(),
                EvalSet::All => s.train.iter().chain(&s.test).collect(),
            };
            let by_id: std::collections::HashMap<&str, &SampleRecord> =
                records.iter().map(|r| (r.matrix_id.as_str(), r)).collect();
            ids.iter()
                .map(|id| {
                    by_id.get(id.as_str()).copied().ok_or_else(|| {
                        CliError::Config(format!(
                            "{}: matrix {id} is not in {}",
                            path.display(),
                            sample.display()
                        ))
                    })
                })
                .collect::<Result<_, _>>()?
        }
    };
    let report = evaluate(&model, &selected).map_err(|e| CliError::Runtime(e.to_string()))?;
    if !report.ordering_holds() {
        return Err(CliError::Runtime(
            "cost ordering N_Opt <= N_kNN <= N_Wrst violated".into(),
        ));
    }
    let stem = output(g, "report")?;
    report
        .write(&stem)
        .map_err(|e| CliError::regression(&stem, e))?;
    print!("{}", report.to_table());
    Ok(())
}
