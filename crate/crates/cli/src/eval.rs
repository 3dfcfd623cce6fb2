use std::io::Write as _;
use std::path::Path;

use convemo::data::Dialog;
use convemo::{evaluate, Model};
use serde::Serialize;

use crate::args::EvalArgs;
use crate::error::CliError;
use crate::output::{load, write_json};
use crate::with_threads;

const MODALITY_COLUMNS: [&str; 3] = ["alpha_a", "alpha_t", "alpha_s"];

/// One CSV row per utterance: dialog id, position, then one weight per modality.
fn dump_attention(path: &Path, model: &Model, dialogs: &[Dialog]) -> Result<(), CliError> {
    let modalities = model.config().fusion_mode.modalities();
    if !model.config().fusion_mode.uses_attention() {
        return Err(CliError::Usage(format!(
            "{} fusion has no modality weights to dump",
            model.config().fusion_mode.label()
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["dialog_id", "utt_index"];
    header.extend(&MODALITY_COLUMNS[..modalities]);
    w.write_record(&header)?;
    for d in dialogs {
        let pred = model.predict(d)?;
        for (t, alpha) in pred.attn_weights.iter().enumerate() {
            let alpha = alpha.as_ref().expect("attention fusion yields weights");
            let mut row = vec![d.id.clone(), t.to_string()];
            row.extend(alpha.data().iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Serialize)]
struct EvalReport<'a> {
    checkpoint: &'a Path,
    data: &'a Path,
    dialogs: usize,
    utterances: usize,
    #[serde(flatten)]
    metrics: convemo::Metrics,
}

pub fn run(a: EvalArgs) -> Result<(), CliError> {
    let model = Model::load(&a.checkpoint).map_err(|e| CliError::Data(format!("{}: {e}", a.checkpoint.display())))?;
    let data = load(&a.data)?;
    let cfg = model.config();
    let m = &data.meta;
    if (m.d_a, m.d_t, m.d_s, m.num_classes()) != (cfg.d_a, cfg.d_t, cfg.d_s, cfg.classes) {
        return Err(CliError::Data(format!(
            "dataset dims ({}, {}, {}) with {} classes do not match checkpoint ({}, {}, {}) with {}",
            m.d_a, m.d_t, m.d_s, m.num_classes(), cfg.d_a, cfg.d_t, cfg.d_s, cfg.classes
        )));
    }
    let threads = a.threads.unwrap_or(1).max(1);
    let metrics = with_threads(threads, || evaluate(&model, &data.dialogs))??;
    if let Some(path) = &a.dump_attn {
        dump_attention(path, &model, &data.dialogs)?;
    }
    let report = EvalReport {
        checkpoint: &a.checkpoint,
        data: &a.data,
        dialogs: data.dialogs.len(),
        utterances: data.num_utterances(),
        metrics,
    };
    match &a.out {
        Some(path) => {
            write_json(path, &report)?;
            println!(
                "UA {:.4} WA {:.4} -> {}",
                report.metrics.unweighted_accuracy,
                report.metrics.weighted_accuracy,
                path.display()
            );
        }
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))?;
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = writeln!(std::io::stdout(), "{text}");
        }
    }
    Ok(())
}
