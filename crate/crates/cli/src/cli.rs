//! Argument definitions for the `bcdm` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Adversarial bi-classifier domain adaptation lab.
#[derive(Parser, Debug)]
#[command(name = "bcdm", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic benchmark datasets.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Train a model and write model.json plus trainlog.csv.
    Train(TrainArgs),
    /// Diagnostics over a trained model.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// Two interlocking moons, with a rotated copy as the target domain.
    Moons(MoonsArgs),
}

#[derive(Args, Debug)]
pub struct MoonsArgs {
    /// Samples per class.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Gaussian noise standard deviation.
    #[arg(long, default_value_t = crate::config::default_noise_sd())]
    pub noise: f64,
    /// Target-domain rotation in degrees.
    #[arg(long, default_value_t = 30.0)]
    pub rotation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Labeled source CSV.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Target CSV (features only, or with a label column for evaluation).
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Label file for an unlabeled target CSV (evaluation only).
    #[arg(long)]
    pub target_labels: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub entropy_weight: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_iteration: Option<usize>,
    #[arg(long)]
    pub base_lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub log_every: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum AnalyzeCommand {
    /// Decision-boundary raster (P5 PGM plus CSV sidecar).
    Boundary(BoundaryArgs),
    /// Histogram of max averaged prediction probability on the target.
    Histogram(HistogramArgs),
    /// Bi-classifier agreement counts on the target.
    Agreement(AgreementArgs),
    /// Proxy A-distance between generator features of two datasets.
    #[command(name = "a-distance")]
    ADistance(ADistanceArgs),
    /// Max-normalized singular values of generator features.
    Svd(SvdArgs),
    /// Generalization-bound term estimates.
    Bound(BoundArgs),
}

#[derive(Args, Debug)]
pub struct BoundaryArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset framing the grid (with --target, the union bounding box).
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Cells per axis.
    #[arg(long, default_value_t = 200)]
    pub res: usize,
    /// Bounding-box padding fraction.
    #[arg(long, default_value_t = 0.2)]
    pub pad: f64,
    /// Output PGM path; the CSV sidecar swaps the extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct HistogramArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AgreementArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ADistanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional CSV destination; the value always prints to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SvdArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub target_labels: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub ddd_restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub ddd_budget: usize,
    #[arg(long, default_value_t = 20)]
    pub rademacher_trials: usize,
    #[arg(long, default_value_t = 100)]
    pub rademacher_budget: usize,
    #[arg(long, default_value_t = 2000)]
    pub joint_budget: usize,
    #[arg(long)]
    pub out: PathBuf,
}
