use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use judgmix::conformal::StoppingConfig;
use judgmix::em::{EmConfig, UpdateRule};
use judgmix::transfer::{Gate, Similarity, SizeWeight, TransferConfig};

/// Master seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 1729;

#[derive(Debug, Parser)]
#[command(name = "judgmix", version, about = "Estimate majority-vote error rates of LLM judge ensembles")]
pub struct Cli {
    /// TOML file whose `[subcommand]` table supplies default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Suppress the stdout summary.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw judgment records from a two-component Beta-Binomial mixture.
    Simulate(SimulateArgs),
    /// Fit mixture parameters to labeled records.
    Fit(FitArgs),
    /// Consume records until the conformal stopping rule fires, then fit.
    Sample(SampleArgs),
    /// Blend a target fit with fits from similar source datasets.
    Transfer(TransferArgs),
    /// Compare estimated and reference error rates across ensemble sizes.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecordFormat {
    Bits,
    Counts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UpdateArg {
    Normalized,
    PseudoCount,
}

#[derive(Debug, Clone, Args)]
pub struct EmArgs {
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = UpdateArg::Normalized)]
    pub update: UpdateArg,
    /// Clamp for s/k away from 0 and 1; defaults to 1/(2k), at most 0.25.
    #[arg(long)]
    pub boundary_smoothing: Option<f64>,
}

impl EmArgs {
    pub fn config(&self) -> EmConfig {
        EmConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            boundary_smoothing: self.boundary_smoothing,
            update: match self.update {
                UpdateArg::Normalized => UpdateRule::Normalized,
                UpdateArg::PseudoCount => UpdateRule::PseudoCount,
            },
            ..EmConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StoppingArgs {
    #[arg(long, default_value_t = 0.03)]
    pub xi: f64,
    #[arg(long, default_value_t = 25.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Sample floor; defaults to the approximate bound ⌈(τ/2ξ)^(2/3)⌉.
    #[arg(long)]
    pub min_samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub consecutive_hits: usize,
}

impl StoppingArgs {
    pub fn config(&self) -> StoppingConfig {
        let mut cfg = StoppingConfig::new(self.epsilon, self.xi, self.tau);
        if let Some(m) = self.min_samples {
            cfg.min_samples = m;
        }
        cfg.consecutive_hits = self.consecutive_hits;
        cfg
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub w: f64,
    #[arg(long)]
    pub a1: f64,
    #[arg(long)]
    pub b1: f64,
    #[arg(long)]
    pub a2: f64,
    #[arg(long)]
    pub b2: f64,
    #[arg(long, default_value_t = 11)]
    pub k: u32,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = RecordFormat::Bits)]
    pub format: RecordFormat,
    /// Also write one synthetic embedding per record.
    #[arg(long, value_name = "FILE")]
    pub emb_out: Option<PathBuf>,
    /// Cluster center as comma-separated floats; defaults to the first unit vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub emb_center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 8)]
    pub emb_dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub emb_spread: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Fit on a seeded random subset of this many records.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopRule {
    Conformal,
    Variance,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[command(flatten)]
    pub stopping: StoppingArgs,
    #[arg(long, value_enum, default_value_t = StopRule::Conformal)]
    pub rule: StopRule,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// CSV of consumed record ids (rep, order, id).
    #[arg(long, value_name = "FILE")]
    pub ids: PathBuf,
    /// Params JSON; the top level holds repetition 0 and `runs` lists all.
    #[arg(long, value_name = "FILE")]
    pub params: PathBuf,
    /// CSV of the stopping statistic after every draw.
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SizeWeightArg {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimilarityArg {
    Cosine,
    InverseEuclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GateArg {
    Sigmoid,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct TransferArgs {
    #[arg(long, value_name = "FILE")]
    pub target: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub target_emb: PathBuf,
    /// Use a seeded random subset of this many target records.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Source data: a params JSON carrying `r`, or a records JSONL. Repeatable.
    #[arg(long, value_name = "FILE")]
    pub source: Vec<PathBuf>,
    /// Embeddings for each `--source`, in the same order.
    #[arg(long, value_name = "FILE")]
    pub source_emb: Vec<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub steepness: f64,
    #[arg(long, default_value_t = 0.7)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = SizeWeightArg::Log)]
    pub size_weight: SizeWeightArg,
    #[arg(long, value_enum, default_value_t = SimilarityArg::Cosine)]
    pub similarity: SimilarityArg,
    #[arg(long, value_enum, default_value_t = GateArg::Sigmoid)]
    pub gate: GateArg,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// CSV with one row per dataset: similarity, λ and fitted parameters.
    #[arg(long, value_name = "FILE")]
    pub weights: PathBuf,
    #[command(flatten)]
    pub em: EmArgs,
}

impl TransferArgs {
    pub fn config(&self) -> TransferConfig {
        TransferConfig {
            steepness: self.steepness,
            threshold: self.threshold,
            size_weight: match self.size_weight {
                SizeWeightArg::Log => SizeWeight::Log,
                SizeWeightArg::Linear => SizeWeight::Linear,
            },
            similarity: match self.similarity {
                SimilarityArg::Cosine => Similarity::Cosine,
                SimilarityArg::InverseEuclidean => Similarity::InverseEuclidean,
            },
            gate: match self.gate {
                GateArg::Sigmoid => Gate::Sigmoid,
                GateArg::None => Gate::None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Adaptive,
    FixedR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Mixture,
    Binomial,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Estimated params JSON; every entry of a `runs` array counts as one run.
    #[arg(long, value_name = "FILE", conflicts_with = "dataset")]
    pub params: Vec<PathBuf>,
    /// Run the sample → fit → margin pipeline on this records file instead.
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_name = "FILE", conflicts_with = "reference_params")]
    pub reference_records: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub reference_params: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,9,11")]
    pub k_list: Vec<u32>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Adaptive)]
    pub protocol: ProtocolArg,
    #[arg(long, value_enum, default_value_t = ModelArg::Mixture)]
    pub model: ModelArg,
    /// Sample count for `--protocol fixed-r`.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub stopping: StoppingArgs,
    #[command(flatten)]
    pub em: EmArgs,
}
