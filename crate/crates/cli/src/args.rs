use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sentivis", version, about = "Visual sentiment prediction pipeline")]
pub struct Cli {
    /// Base seed for splits, codebooks and training (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// key=value settings file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter and majority-vote a post manifest into labeled samples.
    Prepare(PrepareArgs),
    /// Compute a feature store for every sample.
    Extract(ExtractArgs),
    /// Train a codebook or a classifier.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Run the repeated-split AUC protocol and print the result table.
    Evaluate(EvaluateArgs),
    /// List the layers of a network spec with shapes and parameter counts.
    NetInfo(NetInfoArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Subjectivity lexicon; posts need a strong polar tag to be kept.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Fc7,
    Fc8,
    Lowlevel,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fc7 => "fc7",
            Method::Fc8 => "fc8",
            Method::Lowlevel => "lowlevel",
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Network spec (default: the built-in canonical topology).
    #[arg(long)]
    pub net_spec: Option<PathBuf>,
    #[arg(long, conflicts_with = "random_weights")]
    pub weights: Option<PathBuf>,
    /// Use seeded random weights instead of a weights file.
    #[arg(long, value_name = "SEED")]
    pub random_weights: Option<u64>,
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    /// Cluster dense patch descriptors into a visual-word codebook.
    Codebook(CodebookArgs),
    /// Fit one-vs-rest classifiers on a feature store.
    Model(ModelArgs),
}

#[derive(Debug, Args)]
pub struct CodebookArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Number of visual words.
    #[arg(long)]
    pub k: Option<usize>,
    /// Patches sampled per image.
    #[arg(long)]
    pub per_image: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// One or more feature stores; each becomes a table row.
    #[arg(long, num_args = 1.., required = true)]
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Use stratified k-fold partitions with k = runs.
    #[arg(long)]
    pub kfold: bool,
    /// Output prefix: writes PREFIX.txt and PREFIX.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NetInfoArgs {
    #[arg(long)]
    pub net_spec: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
}
