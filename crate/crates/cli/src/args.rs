use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use convemo::System;

/// Multimodal emotion recognition in conversation: training, evaluation and ablations.
#[derive(Debug, Parser)]
#[command(name = "convemo", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/test dataset pair.
    Synth(SynthArgs),
    /// Train one system preset and write a checkpoint, log and metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Train several presets on one dataset pair and report UA per system.
    Ablate(AblateArgs),
    /// Compare analytic gradients with central differences on a small model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of emotion classes [default: 4]
    #[arg(long)]
    pub classes: Option<usize>,
    /// Total number of dialogs before the split [default: 250]
    #[arg(long)]
    pub dialogs: Option<usize>,
    /// Label rule: pointwise, contextual or speaker [default: pointwise]
    #[arg(long)]
    pub regime: Option<String>,
    /// Random seed; falls back to $CONVEMO_SEED, then 0
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature noise standard deviation [default: 0.1]
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Number of speakers, must be even [default: 10]
    #[arg(long)]
    pub speakers: Option<usize>,
    /// Shortest dialog [default: 6]
    #[arg(long)]
    pub min_len: Option<usize>,
    /// Longest dialog [default: 10]
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Acoustic feature dimension [default: 8]
    #[arg(long)]
    pub d_a: Option<usize>,
    /// Lexical feature dimension [default: 6]
    #[arg(long)]
    pub d_t: Option<usize>,
    /// Speaker embedding dimension [default: 4]
    #[arg(long)]
    pub d_s: Option<usize>,
    /// Fraction of dialogs in the training file [default: 0.8]
    #[arg(long, allow_negative_numbers = true)]
    pub train_fraction: Option<f64>,
    /// Directory for train.jsonl and test.jsonl [default: data]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Model and optimiser settings shared by `train` and `ablate`.
#[derive(Debug, Args, Clone, Default)]
pub struct HyperArgs {
    /// JSON file with default values for any of these settings; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed for initialisation, shuffling and dropout; falls back to $CONVEMO_SEED, then 0
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model width; each GRU direction gets d/2 units [default: 100]
    #[arg(long)]
    pub d: Option<usize>,
    /// Attention heads; must divide d [default: 4]
    #[arg(long)]
    pub heads: Option<usize>,
    /// Adam learning rate [default: 0.0001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Dialogs per batch [default: 20]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Dropout on the classifier input [default: 0.2]
    #[arg(long, allow_negative_numbers = true)]
    pub dropout: Option<f64>,
    /// L2 coefficient added to every gradient [default: 1e-5]
    #[arg(long)]
    pub l2: Option<f64>,
    /// Maximum number of epochs [default: 200]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Early-stopping patience on held-out UA, 0 disables [default: 20]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Divide attention scores by sqrt(d/heads)
    #[arg(long)]
    pub scaled_attention: bool,
    /// Worker threads for batch gradients and evaluation [default: 1]
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// System preset S1..S5 [default: S5]
    #[arg(long)]
    pub system: Option<System>,
    /// Training data (JSONL)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Held-out data for early stopping and reporting (JSONL)
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Independent runs with seeds seed, seed+1, ...; reports mean ± std UA [default: 1]
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Output directory [default: run]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset to evaluate (JSONL)
    #[arg(long)]
    pub data: PathBuf,
    /// Write per-utterance fusion weights to this CSV file
    #[arg(long)]
    pub dump_attn: Option<PathBuf>,
    /// Write the metrics JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: 1]
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Training data (JSONL)
    #[arg(long)]
    pub train: PathBuf,
    /// Test data (JSONL)
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated presets to run [default: S1,S2,S3,S4,S5]
    #[arg(long, value_delimiter = ',')]
    pub systems: Option<Vec<System>>,
    /// Runs per system with shared seeds seed, seed+1, ... [default: 1]
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Write the report as CSV to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// System preset [default: S5]
    #[arg(long, default_value = "S5")]
    pub system: System,
    /// Model width
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    /// Attention heads
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    /// Utterances per dialog
    #[arg(long, default_value_t = 4)]
    pub len: usize,
    /// Number of classes
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Dialogs in the batch
    #[arg(long, default_value_t = 2)]
    pub dialogs: usize,
    /// Maximum relative error |a − n| / max(1, |a| + |n|)
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Use scaled attention scores
    #[arg(long)]
    pub scaled_attention: bool,
    /// Random seed; falls back to $CONVEMO_SEED, then 0
    #[arg(long)]
    pub seed: Option<u64>,
}
