//! Fixtures shared by the benchmarks in `benches/`.

use convemo::data::{synth_dialogs, LabelRegime, SynthParams, SynthSpec};
use convemo::{Dialog, Model, ModelConfig, System};

/// Synthetic dialogs of exactly `len` utterances.
pub fn dialogs(count: usize, len: usize, seed: u64) -> Vec<Dialog> {
    let p = fixture_params(count, len);
    let spec = SynthSpec::from_params(&p, seed).expect("valid synthetic spec");
    synth_dialogs(&spec, seed).expect("generation succeeds").dialogs
}

/// A freshly initialised model of width `d` over the fixture dimensions.
pub fn model(system: System, d: usize, heads: usize) -> Model {
    let p = fixture_params(1, 1);
    let cfg = ModelConfig {
        d,
        heads,
        ..ModelConfig::for_system(system, p.d_a, p.d_t, p.d_s, p.classes)
    };
    Model::new(cfg, 0).expect("valid config")
}

fn fixture_params(count: usize, len: usize) -> SynthParams {
    SynthParams {
        dialogs: count,
        min_len: len,
        max_len: len,
        regime: LabelRegime::Contextual,
        ..SynthParams::default()
    }
}
