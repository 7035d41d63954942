//! `gtm`: fit, sample, score and inspect graphical transformation models.

mod commands;
mod error;
mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "gtm", version, about = "Graphical transformation models")]
struct Cli {
    /// Worker threads; 1 gives bit-exact reference results.
    #[arg(long, global = true, env = "GTM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model to a CSV file.
    Fit(FitArgs),
    /// Draw samples from a model.
    Sample(SampleArgs),
    /// Append a log_density column to a CSV file.
    Density(DensityArgs),
    /// Pairwise conditional-independence metrics and dependency graph.
    Metrics(MetricsArgs),
    /// Dependency graph from a pair-metrics CSV.
    Graph(GraphArgs),
    /// Two-class Bayes classifier from two models.
    Classify(ClassifyArgs),
    /// Synthetic conditional-independence benchmark.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    None,
    Lasso,
    Adaptive,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Latent,
    Data,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    /// Training data, one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Fit report; defaults to `<output>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Column to ignore, by 1-based index or header name. Repeatable.
    #[arg(long = "drop-col")]
    pub drop_col: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 15)]
    pub marginal_knots: usize,
    #[arg(long, default_value_t = -15.0, allow_hyphen_values = true)]
    pub marginal_lower: f64,
    #[arg(long, default_value_t = 15.0)]
    pub marginal_upper: f64,
    #[arg(long, default_value_t = 40)]
    pub conditioner_knots: usize,
    #[arg(long, default_value_t = -15.0, allow_hyphen_values = true)]
    pub conditioner_lower: f64,
    #[arg(long, default_value_t = 15.0)]
    pub conditioner_upper: f64,
    /// Constant conditioners (Gaussian copula with spline margins).
    #[arg(long)]
    pub tied: bool,
    #[arg(long, default_value_t = 0.0)]
    pub tau1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau3: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau4: f64,
    #[arg(long, value_enum, default_value_t = Mode::None)]
    pub mode: Mode,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon_smooth: f64,
    /// Random-search trials over the penalties; 0 fits the given values.
    #[arg(long, default_value_t = 0)]
    pub search: usize,
    /// Log-uniform search range `lo,hi` per penalty; `fixed` keeps the flag value.
    #[arg(long, default_value = "1e-4,1e3")]
    pub tau1_range: String,
    #[arg(long, default_value = "1e-4,1e3")]
    pub tau2_range: String,
    #[arg(long, default_value = "1e-4,1e3")]
    pub tau3_range: String,
    #[arg(long, default_value = "1e-4,1e2")]
    pub tau4_range: String,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.2)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 1000)]
    pub pretrain_max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct DensityArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Column to ignore, by 1-based index or header name. Repeatable.
    #[arg(long = "drop-col")]
    pub drop_col: Vec<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct MetricsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Pair-metrics CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// DOT graph to write.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Edge-list CSV to write.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 20)]
    pub quad_n: usize,
    #[arg(long, value_enum, default_value_t = Space::Latent)]
    pub space: Space,
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct GraphArgs {
    /// Pair-metrics CSV written by `gtm metrics`.
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long)]
    pub dot: PathBuf,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    /// Density model of the positive class.
    #[arg(long)]
    pub model_a: PathBuf,
    /// Density model of the negative class.
    #[arg(long)]
    pub model_b: PathBuf,
    /// Test rows with a label column.
    #[arg(long)]
    pub input: PathBuf,
    /// Label column, by 1-based index or header name.
    #[arg(long)]
    pub label_col: String,
    /// Label value of the positive class.
    #[arg(long)]
    pub positive: String,
    /// Prior probability of the positive class.
    #[arg(long, default_value_t = 0.5)]
    pub prior: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05,0.1,0.2")]
    pub fpr: Vec<f64>,
    /// ROC table to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-row posterior probabilities of the positive class.
    #[arg(long)]
    pub posteriors: Option<PathBuf>,
    /// Further columns to ignore. Repeatable.
    #[arg(long = "drop-col")]
    pub drop_col: Vec<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchmarkArgs {
    /// Benchmark spec JSON; the bundled five-dimensional spec by default.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 20)]
    pub quad_n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("usage error: --threads must be at least 1");
            std::process::exit(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("usage error: {e}");
            std::process::exit(2);
        }
    }
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a, cli.threads),
        Command::Sample(a) => commands::sample(a, cli.threads),
        Command::Density(a) => commands::density(a, cli.threads),
        Command::Metrics(a) => commands::metrics(a, cli.threads),
        Command::Graph(a) => commands::graph(a, cli.threads),
        Command::Classify(a) => commands::classify(a, cli.threads),
        Command::Benchmark(a) => commands::benchmark(a, cli.threads),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
