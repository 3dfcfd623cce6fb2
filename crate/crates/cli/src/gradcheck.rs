use convemo::data::{synth_dialogs, SynthParams, SynthSpec};
use convemo::seqmodel::ModelConfig;
use convemo::Model;

use crate::args::GradcheckArgs;
use crate::error::CliError;
use crate::settings::resolve_seed;

pub fn run(a: GradcheckArgs) -> Result<(), CliError> {
    if a.dialogs == 0 || a.len == 0 {
        return Err(CliError::Usage("--dialogs and --len must be at least 1".into()));
    }
    let seed = resolve_seed(a.seed, None)?;
    let params = SynthParams {
        classes: a.classes,
        dialogs: a.dialogs,
        min_len: a.len,
        max_len: a.len,
        sigma: 0.5,
        ..SynthParams::default()
    };
    let data = synth_dialogs(&SynthSpec::from_params(&params, seed)?, seed)?.dialogs;
    let cfg = ModelConfig {
        d: a.d,
        heads: a.heads,
        scaled_attention: a.scaled_attention,
        ..ModelConfig::for_system(a.system, params.d_a, params.d_t, params.d_s, a.classes)
    };
    let model = Model::new(cfg, seed)?;
    let report = model.grad_check(&data, a.tol)?;

    println!(
        "gradcheck {} d={} heads={} len={} classes={} dialogs={} tol={:e}",
        a.system, a.d, a.heads, a.len, a.classes, a.dialogs, a.tol
    );
    for p in &report.params {
        println!(
            "{:<24} {:>3}x{:<3} max_rel_err={:.3e} {}",
            p.name,
            p.rows,
            p.cols,
            p.max_rel_err,
            if p.passed() {
                "PASS".to_string()
            } else {
                format!("FAIL ({} of {} entries)", p.failures.len(), p.rows * p.cols)
            }
        );
    }
    let failed = report.params.iter().filter(|p| !p.passed()).count();
    if failed > 0 {
        return Err(CliError::Numeric(format!(
            "{failed} of {} tensors exceed tolerance {:e}",
            report.params.len(),
            a.tol
        )));
    }
    println!("all {} tensors pass (max rel err {:.3e})", report.params.len(), report.max_rel_err());
    Ok(())
}
