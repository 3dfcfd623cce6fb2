use std::fs;
use std::path::Path;

use convemo::{Dataset, EpochLog};
use serde::Serialize;

use crate::error::CliError;

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<Dataset, CliError> {
    convemo::data::load_dataset(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct LogRow {
    epoch: usize,
    train_loss: f64,
    train_ua: f64,
    val_ua: Option<f64>,
    seconds: f64,
}

/// Training log as CSV: `epoch,train_loss,train_ua,val_ua,seconds`.
pub fn write_log(path: &Path, log: &[EpochLog]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for e in log {
        w.serialize(LogRow {
            epoch: e.epoch,
            train_loss: e.train_loss,
            train_ua: e.train_ua,
            val_ua: e.val_ua,
            seconds: e.seconds,
        })?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn dataset_summary(name: &str, ds: &Dataset) -> String {
    let counts = ds
        .meta
        .class_names
        .iter()
        .zip(ds.class_counts())
        .map(|(c, n)| format!("{c}={n}"))
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "{name}: {} dialogs, {} utterances ({counts})",
        ds.dialogs.len(),
        ds.num_utterances()
    )
}
