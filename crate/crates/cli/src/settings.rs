//! Resolution of run settings: command-line flag, then `--config` file, then default.

use std::fs;
use std::path::{Path, PathBuf};

use convemo::seqmodel::ModelConfig;
use convemo::{System, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::args::HyperArgs;
use crate::error::CliError;

pub const SEED_ENV: &str = "CONVEMO_SEED";

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: Option<System>,
    pub data: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub d: Option<usize>,
    pub heads: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub dropout: Option<f64>,
    pub l2: Option<f64>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub scaled_attention: Option<bool>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Seed from the flag, the config file, `$CONVEMO_SEED`, or 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// Fully resolved model and optimiser settings, echoed to `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hyper {
    pub seed: u64,
    pub d: usize,
    pub heads: usize,
    pub scaled_attention: bool,
    pub threads: usize,
    pub train: TrainConfig,
}

impl Hyper {
    pub fn resolve(args: &HyperArgs, file: &ConfigFile) -> Result<Hyper, CliError> {
        let defaults = TrainConfig::default();
        let seed = resolve_seed(args.seed, file.seed)?;
        let patience = args.patience.or(file.patience).or(defaults.patience).filter(|&p| p > 0);
        let train = TrainConfig {
            lr: args.lr.or(file.lr).unwrap_or(defaults.lr),
            batch_size: args.batch.or(file.batch).unwrap_or(defaults.batch_size),
            epochs: args.epochs.or(file.epochs).unwrap_or(defaults.epochs),
            l2: args.l2.or(file.l2).unwrap_or(defaults.l2),
            dropout_p: args.dropout.or(file.dropout).unwrap_or(defaults.dropout_p),
            seed,
            patience,
            ..defaults
        };
        train.validate()?;
        let threads = args.threads.or(file.threads).unwrap_or(1);
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        Ok(Hyper {
            seed,
            d: args.d.or(file.d).unwrap_or(ModelConfig::DEFAULT_D),
            heads: args.heads.or(file.heads).unwrap_or(ModelConfig::DEFAULT_HEADS),
            scaled_attention: args.scaled_attention || file.scaled_attention.unwrap_or(false),
            threads,
            train,
        })
    }

    /// Model configuration for `system` on data with the given dimensions.
    pub fn model_config(&self, system: System, dims: (usize, usize, usize), classes: usize) -> Result<ModelConfig, CliError> {
        let cfg = ModelConfig {
            d: self.d,
            heads: self.heads,
            scaled_attention: self.scaled_attention,
            dropout_p: self.train.dropout_p,
            ..ModelConfig::for_system(system, dims.0, dims.1, dims.2, classes)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Training settings for repeat `r`, which uses seed `seed + r`.
    pub fn for_repeat(&self, r: usize) -> TrainConfig {
        TrainConfig {
            seed: self.seed.wrapping_add(r as u64),
            ..self.train.clone()
        }
    }
}
