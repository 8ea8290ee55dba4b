use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "amp", version, about = "Adaptive matching pursuit: sparse recovery and benchmark runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem (from --input JSON, or a seeded synthetic instance).
    Recover(RecoverArgs),
    /// Repeated trials of one synthetic regime; one CSV row per trial and solver.
    Bench(BenchArgs),
    /// Repeated trials over a range of planted sparsities.
    Sweep(SweepArgs),
    /// Recover 28x28 images from random Gaussian measurements.
    Image(ImageArgs),
    /// Compare AMP with exhaustive search on small instances.
    OracleCheck(OracleArgs),
}

/// Penalty and solver knobs shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct PenaltyArgs {
    /// Ridge weight lambda [default: 1e-4; 3e-3 for `image`]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Prior activation probability used to derive rho
    #[arg(long, default_value_t = 0.05)]
    pub kappa: f64,
    /// Uniform per-index penalty; overrides the kappa-derived value
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Constrain coefficients to be non-negative
    #[arg(long)]
    pub nonneg: bool,
    /// Elastic-net l1 weight for `fista` [default: 2 sigma sqrt(2 ln p)]
    #[arg(long)]
    pub fista_l1: Option<f64>,
    /// Cap on AMP loop passes [default: 10 p]
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Worker threads for trial-level parallelism
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// CSV destination (standard output when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the full result, AMP reports included, as JSON
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Leave the time_s column empty so output is byte-reproducible
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RecoverArgs {
    /// Problem JSON: {"a": [[row], ...], "y": [...], "lambda"?, "rho"?: number or list, "nonneg"?}
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    pub p: usize,
    #[arg(long, default_value_t = 256)]
    pub q: usize,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One or more of amp, omp, nnomp, cosamp, fista, oracle
    #[arg(long, default_value = "amp")]
    pub solvers: String,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// JSON destination (standard output when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 512)]
    pub p: usize,
    #[arg(long, default_value_t = 256)]
    pub q: usize,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "amp,omp,fista")]
    pub solvers: String,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 512)]
    pub p: usize,
    #[arg(long, default_value_t = 256)]
    pub q: usize,
    /// Sparsity levels: start:stop:step (inclusive) or a comma list
    #[arg(long, default_value = "10:120:10")]
    pub k: String,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "amp,omp,fista")]
    pub solvers: String,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ImageArgs {
    /// IDX image file (28x28); synthetic digit images are used when omitted
    #[arg(long)]
    pub idx_images: Option<PathBuf>,
    /// IDX label file matching --idx-images
    #[arg(long)]
    pub idx_labels: Option<PathBuf>,
    /// Number of images to recover
    #[arg(long, default_value_t = 20)]
    pub idx_limit: usize,
    /// Measurements per image
    #[arg(long, default_value_t = 350)]
    pub measurements: usize,
    #[arg(long, default_value_t = 0.03)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "amp,omp,fista")]
    pub solvers: String,
    /// Directory for PGM dumps of truth, recovered images and support masks
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, default_value_t = 6)]
    pub q: usize,
    /// Largest planted sparsity; trial t plants 1 + t mod k
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
}
