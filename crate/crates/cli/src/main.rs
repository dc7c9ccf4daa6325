//! `dynmf` — fit, score, analyze, and evaluate time-dependent matrix
//! factorizations of node×metric usage data.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "dynmf",
    version,
    about = "Dynamic matrix factorization of node×metric telemetry with reconstruction-error anomaly scoring"
)]
struct Cli {
    /// Cap worker parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Deterministic mode: ordered reductions, no wall-clock in manifests.
    /// Rerunning with identical inputs and flags reproduces outputs
    /// byte-identically.
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    reproducible: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Long,
    Wide,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MissingArg {
    Reject,
    ImputeZero,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StorageArg {
    Binary,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProjectTarget {
    /// Metric factor rows.
    Metrics,
    /// Static node factor rows.
    NodesStatic,
}

#[derive(Subcommand)]
enum Command {
    /// Load a usage CSV, validate it, and persist it as a cube directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Long)]
        format: FormatArg,
        #[arg(long, value_enum, default_value_t = MissingArg::Reject)]
        missing: MissingArg,
        /// Z-score each metric over its observed cells.
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        output: PathBuf,
        /// How the cube directory stores its value slices.
        #[arg(long, value_enum, default_value_t = StorageArg::Binary)]
        storage: StorageArg,
    },

    /// Fit the factor model to a cube.
    Fit {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 20_000)]
        iters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, default_value_t = 0.9)]
        beta1: f64,
        #[arg(long, default_value_t = 0.999)]
        beta2: f64,
        /// L2 penalty weight on all factors.
        #[arg(long, default_value_t = 0.0)]
        l2: f64,
        /// Sample this many timestep slices per step instead of all of them.
        #[arg(long)]
        minibatch: Option<usize>,
        /// Model output directory.
        #[arg(long)]
        output: PathBuf,
        /// Objective trace CSV (`iteration,objective`).
        #[arg(long)]
        trace: PathBuf,
    },

    /// Fit once per requested latent dimension and summarize.
    Sweep {
        #[arg(long)]
        cube: PathBuf,
        /// Comma-separated latent dimensions, e.g. 3,5,10.
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 20_000)]
        iters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, default_value_t = 0.9)]
        beta1: f64,
        #[arg(long, default_value_t = 0.999)]
        beta2: f64,
        #[arg(long, default_value_t = 0.0)]
        l2: f64,
        #[arg(long)]
        minibatch: Option<usize>,
        /// Summary CSV (`k,final_objective,final_avg_abs_error`).
        #[arg(long)]
        output: PathBuf,
        /// Directory receiving one `trace_k<k>.csv` per fit.
        #[arg(long)]
        trace_dir: PathBuf,
    },

    /// Score per-node anomalies from a fitted model.
    Score {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Scores CSV (`timestamp,node,score,flag`).
        #[arg(long)]
        output: PathBuf,
        /// Flagging rule, e.g. quantile:0.99 or zscore:3.
        #[arg(long)]
        flag: Option<String>,
    },

    /// (Re-)threshold an existing scores CSV.
    Flag {
        #[arg(long)]
        scores: PathBuf,
        /// Flagging rule, e.g. quantile:0.99 or zscore:3.
        #[arg(long)]
        method: String,
        #[arg(long)]
        output: PathBuf,
    },

    /// Align flagged scores with an external event log.
    Align {
        #[arg(long)]
        scores: PathBuf,
        /// Events CSV (`timestamp,node,error_type`).
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = 600)]
        window_seconds: i64,
        #[arg(long)]
        output: PathBuf,
    },

    /// 2-D PCA projection of metric or static-node factors.
    Project {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        target: ProjectTarget,
        /// Projection CSV (`label,pc1,pc2`).
        #[arg(long)]
        output: PathBuf,
    },

    /// Pearson correlations between latent dimensions of the dynamic
    /// factors.
    Correlate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },

    /// CP tensor-decomposition baseline scorer.
    Baseline {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long, default_value_t = 10)]
        rank: usize,
        /// Number of alternating-least-squares sweeps.
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },

    /// Generate a synthetic cube from a JSON spec.
    Synth {
        /// SynthSpec JSON file.
        #[arg(long)]
        spec: PathBuf,
        /// Cube output directory.
        #[arg(long)]
        output: PathBuf,
        /// Also write the injected-cell ground truth (`timestamp,node`).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = StorageArg::Binary)]
        storage: StorageArg,
    },

    /// Evaluate scores against an injection ground truth.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Metrics CSV with an `auc` column.
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore the error when a pool already exists (e.g. under tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}");
            eprintln!(
                "{}",
                serde_json::json!({ "error": message, "tool": "dynmf" })
            );
            ExitCode::FAILURE
        }
    }
}
