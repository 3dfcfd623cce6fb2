use std::path::PathBuf;

use convemo::data::{save_dataset, split_by_dialog, synth_dialogs, LabelRegime, SynthParams, SynthSpec};

use crate::args::SynthArgs;
use crate::error::CliError;
use crate::output::{create_dir, dataset_summary};
use crate::settings::resolve_seed;

pub fn run(a: SynthArgs) -> Result<(), CliError> {
    let defaults = SynthParams::default();
    let regime: LabelRegime = match &a.regime {
        Some(r) => r.parse()?,
        None => defaults.regime,
    };
    let params = SynthParams {
        classes: a.classes.unwrap_or(defaults.classes),
        d_a: a.d_a.unwrap_or(defaults.d_a),
        d_t: a.d_t.unwrap_or(defaults.d_t),
        d_s: a.d_s.unwrap_or(defaults.d_s),
        speakers: a.speakers.unwrap_or(defaults.speakers),
        dialogs: a.dialogs.unwrap_or(defaults.dialogs),
        min_len: a.min_len.unwrap_or(defaults.min_len),
        max_len: a.max_len.unwrap_or(defaults.max_len),
        sigma: a.sigma.unwrap_or(defaults.sigma),
        regime,
        ..defaults
    };
    if params.sigma.is_nan() || params.sigma < 0.0 {
        return Err(CliError::Usage(format!("--sigma must be >= 0, got {}", params.sigma)));
    }
    let fraction = a.train_fraction.unwrap_or(0.8);
    let seed = resolve_seed(a.seed, None)?;
    let out_dir = a.out_dir.unwrap_or_else(|| PathBuf::from("data"));

    let spec = SynthSpec::from_params(&params, seed)?;
    let full = synth_dialogs(&spec, seed)?;
    let (train, test) = split_by_dialog(full.dialogs.clone(), fraction, seed)?;
    let train = full.with_dialogs(train, "train");
    let test = full.with_dialogs(test, "test");

    create_dir(&out_dir)?;
    for (name, ds) in [("train", &train), ("test", &test)] {
        let path = out_dir.join(format!("{name}.jsonl"));
        save_dataset(&path, ds).map_err(|e| CliError::io(&path, e))?;
        println!("{}", dataset_summary(&path.display().to_string(), ds));
    }
    Ok(())
}
