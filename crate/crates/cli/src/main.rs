//! `mpcg` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 runtime
//! failure (for example non-convergence), 4 missing model file, 5 I/O error.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mpcg",
    version,
    about = "Mixed-precision two-stage CG with a learned stage-1 tolerance"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for labeling; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory that receives the command's output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Cost weight of a binary32 iteration relative to a binary64 one.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub mu: f64,
    /// Target tolerance of the binary64 stage.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub eps2: f64,
    /// Candidate stage-1 tolerances, strictly descending.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        default_value = "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6,1e-7"
    )]
    pub grid: Vec<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Residual::Relative)]
    pub residual: Residual,
    #[arg(long, global = true, value_enum, default_value_t = Precond::None)]
    pub precond: Precond,
    /// Iteration limit per stage; defaults to 10 n.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Residual {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precond {
    None,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitBy {
    Group,
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalSet {
    Train,
    Test,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the feature vector and Gershgorin intervals of a matrix.
    Features {
        matrix: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the two-stage solver on a Matrix Market file.
    Solve {
        matrix: PathBuf,
        /// Stage-1 tolerance, or `auto` to predict it with `--model`.
        #[arg(long)]
        eps1: String,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Right-hand side: `ones` (b = A 1), `random`, or a file with one value per line.
        #[arg(long, default_value = "ones")]
        rhs: String,
        /// Write the solution, one value per line.
        #[arg(long)]
        x_out: Option<PathBuf>,
    },
    /// Write a sample plan (`plan.json`) mixing structured and perturbed random matrices.
    Generate {
        #[arg(long, default_value_t = 500)]
        matrices: usize,
        #[arg(long, default_value_t = 200)]
        n_min: usize,
        #[arg(long, default_value_t = 1000)]
        n_max: usize,
    },
    /// Label every matrix of a plan; writes `sample.jsonl` and `manifest.json`.
    Label {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Split a sample and fit the model; writes `model.json`, `split.json`, `train_manifest.json`.
    Train {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        #[arg(long, value_enum, default_value_t = SplitBy::Group)]
        split_by: SplitBy,
    },
    /// Score a model; writes `report.txt` and `report.json`.
    Evaluate {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Split produced by `train`; without it every valid record is used.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = EvalSet::Test)]
        set: EvalSet,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
