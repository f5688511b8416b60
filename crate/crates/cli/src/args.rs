use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fgsan_core::model::Variant;
use fgsan_core::numcore::Activation;

#[derive(Debug, Parser)]
#[command(
    name = "fgsan",
    version,
    about = "Feature-selected graph spatial attention networks on dynamic brain graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with planted informative regions.
    Synth(SynthArgs),
    /// Train one model on a single stratified holdout split.
    Train(TrainArgs),
    /// Repeated stratified k-fold cross-validation.
    Cv(CvArgs),
    /// Cross-validate every model variant on the same data.
    Ablate(AblateArgs),
    /// Rank regions by learned gate probability from a results directory.
    Biomarkers(BiomarkerArgs),
    /// Finite-difference check of the analytic gradients on a tiny instance.
    Gradcheck(GradcheckArgs),
    /// Emit CSV series for loss curves and metric bars.
    PlotData(PlotDataArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub regions: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub timesteps: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Comma-separated region indices; pass an empty string for none.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "2,7,11,18,25")]
    pub informative: Vec<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub signal: f64,
    #[arg(long, default_value_t = 3)]
    pub communities: usize,
    #[arg(long, default_value_t = 0.05)]
    pub edge_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the node features as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Experiment settings. Unset flags fall back to `--config`, then to defaults.
#[derive(Debug, Args, Default, Clone)]
pub struct ExperimentArgs {
    /// A `config.json` from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Minibatch size; full batch when unset.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Comma-separated encoder layer widths.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub kl_weight: Option<f64>,
    #[arg(long)]
    pub prior: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub max_bucket: Option<usize>,
    /// Encoder layer function: identity, tanh or relu.
    #[arg(long)]
    pub activation: Option<Activation>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset path; taken from `--config` when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Number of stratified folds the holdout is cut from.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Which fold is held out for validation.
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Variants to run, comma-separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "full,no_spatial,no_selector"
    )]
    pub variants: Vec<Variant>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct BiomarkerArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perturbs the analytic gradient before checking.
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

#[derive(Debug, Args)]
pub struct PlotDataArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
