use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "trimcast", version, about = "Predict the reduced pattern count of cutting-stock solutions")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON file with one object of flag values per subcommand, e.g.
    /// {"train": {"epochs": 200}}. Command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate random instances (JSONL).
    Gen(GenArgs),
    /// Build initial solutions by first-fit decreasing and pair repacking.
    Solve(SolveArgs),
    /// Reduce the pattern count of solutions.
    Reduce(ReduceArgs),
    /// Write solutions as feature matrices to a binary cache.
    Encode(EncodeArgs),
    /// Solve, reduce and encode instances into dataset records.
    Dataset(DatasetArgs),
    /// Fit the quadratic and train the MLP on the same split.
    Train(TrainArgs),
    /// Score saved models on a dataset split.
    Eval(EvalArgs),
    /// Train per optimizer and seed, report mean and spread of test MAPE.
    CompareOptimizers(CompareArgs),
    /// Predict the reduced pattern count of one solution.
    Predict(PredictArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct BudgetArgs {
    /// Wall-clock budget per reduction, e.g. "5s" (not reproducible).
    #[arg(long, value_parser = humantime::parse_duration, conflicts_with = "nodes")]
    pub budget: Option<Duration>,
    /// Search-node budget per reduction (reproducible).
    #[arg(long)]
    pub nodes: Option<u64>,
    /// Seed for the reducer's candidate sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Disable the exact subset search.
    #[arg(long)]
    pub no_exact: bool,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// CCM, F, FP, or "mix" for the reference 15:68:10 proportions.
    #[arg(long, default_value = "mix")]
    pub family: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Instances (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Skip the pair repacking pass.
    #[arg(long)]
    pub no_repack: bool,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    /// Solutions (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Instances the solutions belong to (JSONL).
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// Solutions (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = trimcast_core::encoder::DEFAULT_ROWS)]
    pub rows: usize,
    #[arg(long, default_value_t = trimcast_core::encoder::DEFAULT_SLOTS)]
    pub slots: usize,
}

#[derive(Args, Debug)]
pub struct DatasetArgs {
    /// Instances (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Dataset (JSONL); existing records are kept and skipped.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Append run length, pattern count and master width to the features.
    #[arg(long)]
    pub extra_features: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TrainingArgs {
    #[arg(long, default_value = "adam")]
    pub optimizer: String,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 25)]
    pub patience: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Share of the training split held out for early stopping.
    #[arg(long, default_value_t = 0.2)]
    pub validation_fraction: f64,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "100,100")]
    pub hidden: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for models, history and metrics.
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds the split, the weight initialisation and batch order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Dataset (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub mlp: Option<PathBuf>,
    #[arg(long)]
    pub quadratic: Option<PathBuf>,
    /// Output directory for metrics.csv, histogram.csv and scatter.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Split seed; must match the one used for training.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Score every record instead of the test split.
    #[arg(long)]
    pub all: bool,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Dataset (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Split seed and first training seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Optimizers to compare (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub optimizers: Vec<String>,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// MLP (.tcm) or quadratic (JSON) model.
    #[arg(long)]
    pub model: PathBuf,
    /// A solution, an {"instance", "solution"} pair, or a dataset record.
    #[arg(long)]
    pub solution: PathBuf,
    /// Instance supplying the master width for a bare solution.
    #[arg(long, conflicts_with = "master")]
    pub instance: Option<PathBuf>,
    /// Master width for a bare solution.
    #[arg(long)]
    pub master: Option<u32>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long)]
    pub mlp: Option<PathBuf>,
    #[arg(long)]
    pub quadratic: Option<PathBuf>,
    /// Default wall-clock budget per session.
    #[arg(long, value_parser = humantime::parse_duration, default_value = "150s", conflicts_with = "nodes")]
    pub budget: Duration,
    /// Node budget per session instead of wall clock.
    #[arg(long)]
    pub nodes: Option<u64>,
    /// Directory with the built UI, served at /.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = trimcast_service::DEFAULT_MAX_SESSIONS)]
    pub max_sessions: usize,
    /// How long finished sessions stay queryable.
    #[arg(long, value_parser = humantime::parse_duration, default_value = "1h")]
    pub ttl: Duration,
}
