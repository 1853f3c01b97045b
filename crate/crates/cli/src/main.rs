mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

const SUBCOMMANDS: &[&str] = &[
    "oversmoothing",
    "train",
    "depth-sweep",
    "limit-check",
    "bench",
    "pagerank-lambda",
];

#[derive(Parser, Debug)]
#[command(
    name = "airc",
    version,
    about = "Adaptive initial-residual graph convolution experiments"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Flat JSON file whose keys mirror the long flags (snake_case).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Energy and rank versus depth for GCN and the adaptive layer.
    Oversmoothing(OversmoothingArgs),
    /// Node classification over several seeds.
    Train(TrainArgs),
    /// Test accuracy versus depth for several variants.
    DepthSweep(DepthSweepArgs),
    /// Compare unrolled linear propagation with its closed-form limit.
    LimitCheck(LimitCheckArgs),
    /// Time one layer forward over a grid of graph sizes.
    Bench(BenchArgs),
    /// Write PageRank-based residual strengths.
    PagerankLambda(PagerankLambdaArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Augmented,
    Plain,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Learnable,
    Pagerank,
    Static,
    Gcn,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Relu,
    LeakyRelu,
    Identity,
}

#[derive(Args, Debug, Clone)]
pub struct SbmArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.2)]
    pub p: f64,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub mu1: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub mu2: f64,
    #[arg(long, default_value_t = 2.0)]
    pub std: f64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Seed of the synthetic graph (independent of the run seed).
    #[arg(long, default_value_t = 0)]
    pub sbm_seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct LambdaArgs {
    #[arg(long, default_value_t = 0.1)]
    pub k: f64,
    #[arg(long, default_value_t = 0.7)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 0.3)]
    pub lambda_min: f64,
}

#[derive(Args, Debug, Clone)]
pub struct OversmoothingArgs {
    #[command(flatten)]
    pub sbm: SbmArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, default_value_t = 16)]
    pub depth: usize,
    /// Leaky-ReLU slope.
    #[arg(long, default_value_t = 0.2)]
    pub slope: f64,
    #[arg(long, value_enum, default_value_t = NormArg::Augmented)]
    pub norm: NormArg,
    /// Also dump every layer's embeddings.
    #[arg(long)]
    pub snapshot: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Dataset bundle directory; the synthetic block model is used if absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub sbm: SbmArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.4)]
    pub dropout: f64,
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    pub activation: ActivationArg,
    #[arg(long, default_value_t = 0.2)]
    pub slope: f64,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub patience: usize,
    /// Number of runs; run `i` uses seed `--seed + i`.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, value_enum, default_value_t = NormArg::Augmented)]
    pub norm: NormArg,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = StrategyArg::Learnable)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
}

#[derive(Args, Debug, Clone)]
pub struct DepthSweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2)]
    pub min_depth: usize,
    #[arg(long, default_value_t = 8)]
    pub max_depth: usize,
    /// Comma-separated strategies.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "learnable,pagerank,gcn")]
    pub variants: Vec<StrategyArg>,
}

#[derive(Args, Debug, Clone)]
pub struct LimitCheckArgs {
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[arg(long, default_value_t = 64)]
    pub max_n: usize,
    #[arg(long, default_value_t = 8)]
    pub max_d: usize,
    /// Relative-change stopping tolerance of the unrolled iteration.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Required relative agreement with the solved limit.
    #[arg(long, default_value_t = 1e-8)]
    pub match_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_steps: usize,
    /// Set one residual strength to 1 to exercise the failure path.
    #[arg(long)]
    pub inject_unit_lambda: bool,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    /// Comma-separated `n:edges:d` triples.
    #[arg(long, default_value = "1000:50000:16,1000:100000:16,1000:100000:32")]
    pub grid: String,
    #[arg(long, default_value_t = 21)]
    pub repeats: usize,
}

#[derive(Args, Debug, Clone)]
pub struct PagerankLambdaArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub sbm: SbmArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, default_value_t = 0.85)]
    pub damping: f64,
}

pub enum CliError {
    Usage(String),
    Failure(String),
}

fn parse_args() -> Result<Cli, clap::Error> {
    let raw: Vec<OsString> = std::env::args_os().collect();
    let first = Cli::try_parse_from(&raw)?;
    let Some(path) = config::find_config(&raw) else {
        return Ok(first);
    };
    let extra = config::config_tokens(PathBuf::from(&path).as_path())
        .map_err(|e| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{e}\n")))?;
    Cli::try_parse_from(config::splice_after_subcommand(&raw, SUBCOMMANDS, extra))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("AIRC_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .parse()
        .map_err(|_| CliError::Usage(format!("AIRC_THREADS={v:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Failure(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match parse_args() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|_| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
