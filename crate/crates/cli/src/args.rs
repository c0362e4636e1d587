use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Hybrid photonic-classical architecture search, training and hardware
/// timing.
#[derive(Debug, Parser)]
#[command(name = "photonas", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for fitness evaluation and multi-seed runs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Genetic search over the gene table.
    Search(SearchArgs),
    /// Full training of one genome.
    Train(TrainArgs),
    /// Per-image latency estimate for the photonic processor.
    EstimateHw(EstimateArgs),
    /// Quantum-contribution metrics of a trained checkpoint.
    Analyze(AnalyzeArgs),
    /// Correlation of early-epoch with final-epoch proxy accuracy.
    CorrelateEpochs(ScanArgs),
    /// Hybrid against its parameter-matched classical baseline.
    Baseline(BaselineArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// `digits` or `mnist`.
    #[arg(long)]
    pub dataset: Option<String>,

    #[arg(long, env = "PHOTONAS_DATA_DIR")]
    pub data_dir: Option<PathBuf>,

    /// PCA components and photonic input size.
    #[arg(long)]
    pub input_size: Option<usize>,

    #[arg(long)]
    pub val_fraction: Option<f64>,

    /// Seed of the train/validation split.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProxyArgs {
    #[arg(long)]
    pub proxy_epochs: Option<usize>,

    #[arg(long)]
    pub proxy_size: Option<usize>,

    /// Gene table TOML; the built-in table when absent.
    #[arg(long)]
    pub gene_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub proxy: ProxyArgs,

    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub gens: Option<usize>,
    #[arg(long)]
    pub crossover_rate: Option<f64>,
    #[arg(long)]
    pub mutation_rate: Option<f64>,
    #[arg(long)]
    pub elite: Option<usize>,
    #[arg(long)]
    pub tournament: Option<usize>,

    /// Fitness evaluator: `proxy-train` or `mock`.
    #[arg(long)]
    pub fitness: Option<String>,

    /// Ignore an existing search checkpoint in the output directory.
    #[arg(long)]
    pub fresh: bool,

    /// Stop after this many generations in this invocation, leaving the
    /// checkpoint for a later resume.
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenomeSource {
    /// Genome JSON (gene name to value), e.g. a search's best_genome.json.
    #[arg(long, conflicts_with = "reference")]
    pub genome: Option<PathBuf>,

    /// Reference best configuration: `digits` or `mnist`.
    #[arg(long)]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub source: GenomeSource,
    #[arg(long)]
    pub gene_table: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Take modes and photons from a trained checkpoint.
    #[arg(long, conflicts_with_all = ["modes", "photons"])]
    pub checkpoint: Option<PathBuf>,

    #[arg(long, requires = "photons")]
    pub modes: Option<usize>,

    #[arg(long, requires = "modes")]
    pub photons: Option<usize>,

    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub k_det_ms: Option<f64>,
    #[arg(long)]
    pub reconfig_ms: Option<f64>,
    #[arg(long)]
    pub t_lat_ms: Option<f64>,
    #[arg(long)]
    pub path_length_m: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Circuit depth model: `fitted` or `mesh`.
    #[arg(long)]
    pub depth_model: Option<String>,

    /// Classical subtotal to add, in ms.
    #[arg(long, conflicts_with = "measure_classical")]
    pub classical_ms: Option<f64>,
    #[arg(long, requires = "classical_ms")]
    pub classical_std_ms: Option<f64>,

    /// Time the checkpoint's classical forward pass on this host.
    #[arg(long, requires = "checkpoint")]
    pub measure_classical: bool,

    #[arg(long, default_value_t = 100)]
    pub runs: usize,

    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub proxy: ProxyArgs,
    #[arg(long)]
    pub n_arch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub source: GenomeSource,
    #[arg(long)]
    pub gene_table: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Comma-separated seeds; three seeds from `--seed` when absent.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}
