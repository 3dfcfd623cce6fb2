use std::fmt::Write as _;

use convemo::{evaluate, train, Model, System};
use serde::Serialize;

use crate::args::AblateArgs;
use crate::error::CliError;
use crate::output::{load, mean_std};
use crate::settings::{ConfigFile, Hyper};
use crate::train::dims;
use crate::with_threads;

/// One row of the ablation table.
#[derive(Debug, Serialize)]
struct Row {
    system: System,
    modalities: &'static str,
    fusion: &'static str,
    classifier: &'static str,
    ua_mean: f64,
    ua_std: f64,
    runs: usize,
}

pub fn run(a: AblateArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(a.hyper.config.as_deref())?;
    let hyper = Hyper::resolve(&a.hyper, &file)?;
    let systems = a.systems.unwrap_or_else(|| System::ALL.to_vec());
    if systems.is_empty() {
        return Err(CliError::Usage("--systems is empty".into()));
    }
    let repeats = a.repeats.or(file.repeats).unwrap_or(1);
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let train_set = load(&a.train)?;
    let test_set = load(&a.test)?;
    let (dims, classes) = dims(&train_set, Some(&test_set))?;

    let mut rows = Vec::with_capacity(systems.len());
    for &system in &systems {
        let model_cfg = hyper.model_config(system, dims, classes)?;
        let mut uas = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let cfg = hyper.for_repeat(r);
            let model = Model::new(model_cfg.clone(), cfg.seed)?;
            let ua = with_threads(hyper.threads, || -> Result<f64, CliError> {
                let out = train(model, &train_set.dialogs, None, &cfg)?;
                Ok(evaluate(&out.model, &test_set.dialogs)?.unweighted_accuracy)
            })??;
            eprintln!("{system} seed {}: test UA {ua:.4}", cfg.seed);
            uas.push(ua);
        }
        let (ua_mean, ua_std) = mean_std(&uas);
        rows.push(Row {
            system,
            modalities: system.modalities(),
            fusion: system.fusion().label(),
            classifier: system.classifier().label(),
            ua_mean,
            ua_std,
            runs: repeats,
        });
    }

    print!("{}", render(&rows));
    if let Some(path) = &a.out {
        let mut w = csv::Writer::from_path(path)?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

fn render(rows: &[Row]) -> String {
    let mut s = format!(
        "{:<6} {:<10} {:<11} {:<10} {}\n",
        "System", "Modalities", "Fusion", "Classifier", "UA(%)"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<6} {:<10} {:<11} {:<10} {:.2} ± {:.2}",
            r.system.name(),
            r.modalities,
            r.fusion,
            r.classifier,
            100.0 * r.ua_mean,
            100.0 * r.ua_std
        );
    }
    s
}
