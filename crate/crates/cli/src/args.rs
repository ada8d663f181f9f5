//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use entrisk::dro::Norm;
use entrisk::estimators::{BiasMethod, EstimatorKind};

use crate::experiments::Experiment;

/// Entropic risk estimation, bias-aware fitting, robust optimization and
/// insurance pricing experiments.
///
/// Loss files for `estimate` and `fit-gmm` are a headerless single column
/// of reals. Scenario files for `dro`, `tune-radius` and `insurance` are
/// headered CSV matrices with one scenario per row. The thread count of
/// parallel sections is taken from ENTRISK_THREADS when set.
#[derive(Debug, Parser)]
#[command(name = "entrisk", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print every estimator's value for a loss file.
    Estimate(EstimateArgs),
    /// Fit a Gaussian mixture to a loss file.
    FitGmm(FitGmmArgs),
    /// Solve or evaluate a robust problem on a scenario file.
    Dro(DroArgs),
    /// Cross-validate the ambiguity radius of an insurance instance.
    TuneRadius(TuneRadiusArgs),
    /// Price an insurance instance and evaluate it out of sample.
    Insurance(InsuranceArgs),
    /// Run a batch experiment and write its tables.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Headerless single-column loss file.
    pub file: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Bootstrap repetitions.
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated estimator names (default: all).
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<EstimatorKind>>,
    /// Mixture components for the fitted estimators.
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    Em,
    Match,
    Evt,
}

#[derive(Debug, Args)]
pub struct FitGmmArgs {
    #[arg(value_enum)]
    pub method: FitMethod,
    /// Headerless single-column loss file.
    pub file: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    /// Iteration cap for EM or risk matching.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Write the risk-matching trace to this CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DroProblem {
    Linear,
    Newsvendor,
    Regression,
}

#[derive(Debug, Args)]
pub struct DroArgs {
    #[arg(value_enum)]
    pub problem: DroProblem,
    /// Headered scenario CSV. Newsvendor reads the first column as demand;
    /// regression reads the last column as the label.
    pub file: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = Norm::L2)]
    pub norm: Norm,
    /// Evaluate this comma-separated decision instead of solving.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Option<Vec<f64>>,
    /// Box bounds on every coordinate of the linear problem.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lower: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub upper: f64,
    /// Newsvendor unit ordering cost.
    #[arg(long)]
    pub order: Option<f64>,
    /// Newsvendor unit cost of unmet demand.
    #[arg(long)]
    pub backorder: Option<f64>,
    /// Newsvendor unit cost of leftover stock.
    #[arg(long)]
    pub holding: Option<f64>,
    /// Subgradient iterations for regression.
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the training scenarios of an insurance command come from.
#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// TOML instance file with M, alpha0, alphas, gammas, r, N and seed.
    #[arg(long)]
    pub config: PathBuf,
    /// Headered market CSV used instead of sampling N rows from the instance.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Overrides the instance seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = Norm::L2)]
    pub norm: Norm,
}

/// Radius grid and correction settings.
#[derive(Debug, Args)]
pub struct TuningArgs {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.0)]
    pub eps_min: f64,
    #[arg(long, default_value_t = 6.0)]
    pub eps_max: f64,
    #[arg(long, default_value_t = 20)]
    pub eps_points: usize,
    /// Bootstrap repetitions of the bias correction.
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// Iteration cap of risk matching.
    #[arg(long, default_value_t = 3000)]
    pub match_iters: usize,
    /// Shuffle rows before forming folds.
    #[arg(long)]
    pub shuffle: bool,
}

#[derive(Debug, Args)]
pub struct TuneRadiusArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Bias correction: NONE, BS_MLE, BS_MATCH or BS_EVT.
    #[arg(long, default_value_t = BiasMethod::None)]
    pub method: BiasMethod,
    /// Per-radius CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InsuranceArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Solve at this radius instead of tuning it.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Comma-separated calibration methods to tune with.
    #[arg(long, value_delimiter = ',', default_values_t = [BiasMethod::None, BiasMethod::Match, BiasMethod::Evt])]
    pub methods: Vec<BiasMethod>,
    /// Out-of-sample rows sampled from the instance.
    #[arg(long, default_value_t = 100_000)]
    pub test_size: usize,
    /// Results CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: Experiment,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Repetitions (instances or seeds); overrides the scale.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Fraction of the full-scale repetition count.
    #[arg(long, conflicts_with = "full_scale")]
    pub scale: Option<f64>,
    /// Full-scale repetition counts and test sizes.
    #[arg(long)]
    pub full_scale: bool,
    /// Comma-separated sample sizes replacing the experiment's defaults.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Risk aversion for experiments that take one.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bootstrap repetitions of the bias corrections.
    #[arg(long)]
    pub boot: Option<usize>,
    /// Out-of-sample rows for insurance experiments.
    #[arg(long)]
    pub test_size: Option<usize>,
    /// Iteration cap of risk matching.
    #[arg(long)]
    pub match_iters: Option<usize>,
    /// Output directory (default `results/<name>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
