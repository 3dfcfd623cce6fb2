use std::path::{Path, PathBuf};

use convemo::seqmodel::ModelConfig;
use convemo::{evaluate, train, Dataset, Metrics, Model, System};
use serde::Serialize;

use crate::args::TrainArgs;
use crate::error::CliError;
use crate::output::{create_dir, load, mean_std, write_json, write_log};
use crate::settings::{ConfigFile, Hyper};
use crate::with_threads;

#[derive(Serialize)]
struct RunEcho<'a> {
    system: System,
    fusion: &'a str,
    classifier: &'a str,
    data: &'a Path,
    val: Option<&'a Path>,
    repeats: usize,
    hyper: &'a Hyper,
    model: &'a ModelConfig,
}

#[derive(Serialize)]
struct MetricsReport {
    system: System,
    seed: u64,
    epochs_run: usize,
    best_epoch: usize,
    clamped_log_probs: usize,
    train: Metrics,
    val: Option<Metrics>,
}

#[derive(Serialize)]
struct RepeatSummary {
    system: System,
    repeats: usize,
    evaluated_on: &'static str,
    ua: Vec<f64>,
    ua_mean: f64,
    ua_std: f64,
}

/// Data dimensions shared by a training set and an optional held-out set.
pub fn dims(train: &Dataset, other: Option<&Dataset>) -> Result<((usize, usize, usize), usize), CliError> {
    let m = &train.meta;
    if let Some(o) = other {
        let n = &o.meta;
        if (m.d_a, m.d_t, m.d_s) != (n.d_a, n.d_t, n.d_s) || m.class_names != n.class_names {
            return Err(CliError::Data(format!(
                "held-out data has dims ({}, {}, {}) and classes {:?}, training data ({}, {}, {}) and {:?}",
                n.d_a, n.d_t, n.d_s, n.class_names, m.d_a, m.d_t, m.d_s, m.class_names
            )));
        }
    }
    Ok(((m.d_a, m.d_t, m.d_s), m.num_classes()))
}

pub fn run(a: TrainArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(a.hyper.config.as_deref())?;
    let hyper = Hyper::resolve(&a.hyper, &file)?;
    let system = a.system.or(file.system).unwrap_or(System::S5);
    let data_path = a
        .data
        .or(file.data.clone())
        .ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let val_path = a.val.or(file.val.clone());
    let repeats = a.repeats.or(file.repeats).unwrap_or(1);
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let out_dir = a.out_dir.or(file.out_dir.clone()).unwrap_or_else(|| PathBuf::from("run"));

    let data = load(&data_path)?;
    let val = val_path.as_deref().map(load).transpose()?;
    let (dims, classes) = dims(&data, val.as_ref())?;
    let model_cfg = hyper.model_config(system, dims, classes)?;

    let echo = RunEcho {
        system,
        fusion: system.fusion().label(),
        classifier: match model_cfg.classifier_mode {
            convemo::ClassifierMode::SaGru => "SA_GRU",
            convemo::ClassifierMode::AttnOnly => "ATTN_ONLY",
            convemo::ClassifierMode::GruOnly => "GRU_ONLY",
        },
        data: &data_path,
        val: val_path.as_deref(),
        repeats,
        hyper: &hyper,
        model: &model_cfg,
    };
    create_dir(&out_dir)?;
    write_json(&out_dir.join("config.json"), &echo)?;
    println!(
        "config: system={system} fusion={} classifier={} d={} heads={} lr={} batch={} dropout={} l2={} epochs={} patience={} seed={} threads={}",
        echo.fusion,
        echo.classifier,
        hyper.d,
        hyper.heads,
        hyper.train.lr,
        hyper.train.batch_size,
        hyper.train.dropout_p,
        hyper.train.l2,
        hyper.train.epochs,
        hyper.train.patience.map_or("off".to_string(), |p| p.to_string()),
        hyper.seed,
        hyper.threads,
    );

    let mut uas = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let dir = if repeats == 1 {
            out_dir.clone()
        } else {
            out_dir.join(format!("run{r:02}"))
        };
        create_dir(&dir)?;
        let cfg = hyper.for_repeat(r);
        let model = Model::new(model_cfg.clone(), cfg.seed)?;
        let (outcome, train_m, val_m) = with_threads(hyper.threads, || -> Result<_, CliError> {
            let outcome = train(model, &data.dialogs, val.as_ref().map(|v| v.dialogs.as_slice()), &cfg)?;
            let train_m = evaluate(&outcome.model, &data.dialogs)?;
            let val_m = val.as_ref().map(|v| evaluate(&outcome.model, &v.dialogs)).transpose()?;
            Ok((outcome, train_m, val_m))
        })??;

        outcome.model.save(dir.join("checkpoint.json")).map_err(|e| CliError::io(&dir, e))?;
        write_log(&dir.join("train_log.csv"), &outcome.log)?;
        let ua = val_m.as_ref().unwrap_or(&train_m).unweighted_accuracy;
        println!(
            "{system} seed {}: epochs {} best {} train UA {:.4}{}",
            cfg.seed,
            outcome.log.len(),
            outcome.best_epoch,
            train_m.unweighted_accuracy,
            val_m
                .as_ref()
                .map_or(String::new(), |m| format!(" val UA {:.4}", m.unweighted_accuracy))
        );
        write_json(
            &dir.join("metrics.json"),
            &MetricsReport {
                system,
                seed: cfg.seed,
                epochs_run: outcome.log.len(),
                best_epoch: outcome.best_epoch,
                clamped_log_probs: outcome.clamped,
                train: train_m,
                val: val_m,
            },
        )?;
        uas.push(ua);
    }

    if repeats > 1 {
        let (mean, std) = mean_std(&uas);
        let evaluated_on = if val.is_some() { "val" } else { "train" };
        println!("{system} UA ({evaluated_on}) over {repeats} runs: {:.2} ± {:.2} %", 100.0 * mean, 100.0 * std);
        write_json(
            &out_dir.join("summary.json"),
            &RepeatSummary {
                system,
                repeats,
                evaluated_on,
                ua: uas,
                ua_mean: mean,
                ua_std: std,
            },
        )?;
    }
    Ok(())
}
