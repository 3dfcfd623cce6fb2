use convemo::data::{synth_dialogs, LabelRegime, SynthParams, SynthSpec};
use convemo::seqmodel::ClassifierMode;
use convemo::train::batch_gradient;
use convemo::*;
use proptest::prelude::*;

fn dialogs(classes: usize, n: usize, min_len: usize, max_len: usize, sigma: f64, seed: u64) -> Vec<Dialog> {
    let p = SynthParams {
        classes,
        dialogs: n,
        min_len,
        max_len,
        sigma,
        ..SynthParams::default()
    };
    let spec = SynthSpec::from_params(&p, seed).unwrap();
    synth_dialogs(&spec, seed).unwrap().dialogs
}

fn small_config(system: System, d: usize, heads: usize, classes: usize) -> ModelConfig {
    let p = SynthParams::default();
    ModelConfig {
        d,
        heads,
        ..ModelConfig::for_system(system, p.d_a, p.d_t, p.d_s, classes)
    }
}

#[test]
fn full_model_gradients_match_central_differences_for_every_system() {
    let batch = dialogs(3, 2, 4, 4, 0.5, 11);
    for system in System::ALL {
        let model = Model::new(small_config(system, 8, 2, 3), 5).unwrap();
        let report = model.grad_check(&batch, 1e-4).unwrap();
        let names: Vec<&str> = report.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, model.param_names(), "{system}");
        for p in &report.params {
            assert!(p.passed(), "{system} {}: max rel err {:e}", p.name, p.max_rel_err);
        }
    }
}

#[test]
fn scaled_attention_gradients_match_central_differences() {
    let batch = dialogs(3, 2, 3, 5, 0.5, 12);
    let cfg = ModelConfig {
        scaled_attention: true,
        ..small_config(System::S5, 8, 2, 3)
    };
    let report = Model::new(cfg, 6).unwrap().grad_check(&batch, 1e-4).unwrap();
    assert!(report.passed(), "max rel err {:e}", report.max_rel_err());
}

#[test]
fn parallel_batch_gradient_matches_sequential_sum() {
    let batch = dialogs(4, 6, 2, 7, 0.3, 13);
    let model = Model::new(small_config(System::S5, 8, 2, 4), 7).unwrap();
    let refs: Vec<&Dialog> = batch.iter().collect();
    let par = batch_gradient(&model, &refs, None).unwrap();
    let (loss, grads) = model.batch_loss(&batch).unwrap();
    assert_eq!(par.loss.to_bits(), loss.to_bits());
    for (a, b) in par.grads.iter().zip(grads.iter()) {
        assert_eq!(a, b);
    }
}

fn max_perm_mismatch(orig: &Matrix, shuffled: &Matrix, perm: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &src) in perm.iter().enumerate() {
        for c in 0..orig.cols() {
            worst = worst.max((shuffled.get(i, c) - orig.get(src, c)).abs());
        }
    }
    worst
}

fn reversal(len: usize) -> Vec<usize> {
    (0..len).rev().collect()
}

#[test]
fn attention_only_pipeline_is_permutation_equivariant() {
    let model = Model::new(small_config(System::S3, 8, 2, 4), 21).unwrap();
    for d in dialogs(4, 10, 2, 9, 1.0, 22) {
        let perm = reversal(d.len());
        let base = model.predict(&d).unwrap().probs;
        let shuffled = model.predict(&d.permuted(&perm)).unwrap().probs;
        assert!(max_perm_mismatch(&base, &shuffled, &perm) < 1e-9);
    }
}

#[test]
fn recurrent_classifiers_are_order_sensitive() {
    for system in [System::S5, System::S4] {
        let model = Model::new(small_config(system, 8, 2, 4), 23).unwrap();
        let d = &dialogs(4, 1, 6, 6, 1.0, 24)[0];
        let perm = [3, 0, 5, 1, 4, 2];
        let base = model.predict(d).unwrap().probs;
        let shuffled = model.predict(&d.permuted(&perm)).unwrap().probs;
        assert!(max_perm_mismatch(&base, &shuffled, &perm) > 1e-6, "{system}");
    }
}

#[test]
fn head_and_attention_shapes() {
    for len in [1, 2, 5] {
        for d in [4, 8] {
            for heads in [1, 2, 4] {
                let model = Model::new(small_config(System::S5, d, heads, 4), 1).unwrap();
                let fused = Matrix::from_fn(len, d, |i, j| ((i * 7 + j) as f64).sin());
                let out = model.classify_dialog(&fused, false, None).unwrap();
                assert_eq!(out.heads.len(), heads);
                for h in &out.heads {
                    assert_eq!((h.rows(), h.cols()), (len, d / heads));
                }
                let r = out.attention.unwrap();
                assert_eq!((r.rows(), r.cols()), (len, d));
                assert_eq!((out.probs.rows(), out.probs.cols()), (len, 4));
            }
        }
    }
}

#[test]
fn gru_only_has_no_attention_output() {
    let model = Model::new(small_config(System::S4, 8, 2, 4), 1).unwrap();
    let out = model.classify_dialog(&Matrix::filled(3, 8, 0.1), false, None).unwrap();
    assert!(out.attention.is_none() && out.heads.is_empty());
    assert_eq!(model.config().classifier_mode, ClassifierMode::GruOnly);
}

#[test]
fn checkpoint_roundtrip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for system in System::ALL {
        let model = Model::new(small_config(system, 8, 2, 4), 31).unwrap();
        let path = dir.path().join(format!("{system}.json"));
        model.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.param_matrices().iter().zip(model.param_matrices()) {
            let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }
}

#[test]
fn checkpoint_with_wrong_layout_is_rejected() {
    let s5 = Model::new(small_config(System::S5, 8, 2, 4), 1).unwrap().to_json().unwrap();
    let tampered = s5.replacen("\"SA_GRU\"", "\"GRU_ONLY\"", 1);
    assert!(Model::from_json(&tampered).is_err());
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = dialogs(4, 8, 3, 6, 0.1, 41);
    let model = Model::new(small_config(System::S5, 8, 2, 4), 42).unwrap();
    let cfg = TrainConfig {
        lr: 0.0,
        l2: 0.0,
        epochs: 3,
        batch_size: 3,
        patience: None,
        ..TrainConfig::default()
    };
    let out = train(model.clone(), &data, None, &cfg).unwrap();
    assert_eq!(out.model.params(), model.params());
    assert_eq!(out.log.len(), 3);
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let data = dialogs(4, 12, 3, 6, 0.2, 51);
    let cfg = TrainConfig {
        lr: 5e-3,
        epochs: 3,
        batch_size: 5,
        seed: 9,
        patience: None,
        ..TrainConfig::default()
    };
    let run = || {
        let model = Model::new(small_config(System::S5, 8, 2, 4), 9).unwrap();
        train(model, &data, None, &cfg).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    let losses = |o: &TrainOutcome| o.log.iter().map(|l| l.train_loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&b));
    let c = train(
        Model::new(small_config(System::S5, 8, 2, 4), 9).unwrap(),
        &data,
        None,
        &TrainConfig { seed: 10, ..cfg.clone() },
    )
    .unwrap();
    assert_ne!(c.model.params(), a.model.params());
}

#[test]
fn evaluation_does_not_mutate_and_ignores_dropout() {
    let data = dialogs(4, 5, 3, 6, 0.2, 61);
    let mut cfg = small_config(System::S5, 8, 2, 4);
    cfg.dropout_p = 0.9;
    let model = Model::new(cfg, 62).unwrap();
    let before = model.clone();
    let a = evaluate(&model, &data).unwrap();
    let b = evaluate(&model, &data).unwrap();
    assert_eq!(a, b);
    assert_eq!(model, before);
}

#[test]
fn divergence_guard_reports_epoch_and_batch() {
    let data = dialogs(4, 4, 3, 4, 0.1, 71);
    let mut model = Model::new(small_config(System::S2, 8, 2, 4), 72).unwrap();
    model.params_mut().classifier.b_out.set(0, 0, f64::INFINITY);
    let cfg = TrainConfig {
        epochs: 2,
        patience: None,
        ..TrainConfig::default()
    };
    match train(model, &data, None, &cfg) {
        Err(Error::Diverged { epoch, batch, .. }) => assert_eq!((epoch, batch), (1, 0)),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn early_stopping_keeps_best_validation_epoch() {
    let data = dialogs(4, 20, 3, 6, 0.1, 81);
    let (tr, val) = data.split_at(15);
    let cfg = TrainConfig {
        lr: 1e-2,
        epochs: 40,
        batch_size: 5,
        patience: Some(3),
        ..TrainConfig::default()
    };
    let out = train(Model::new(small_config(System::S5, 8, 2, 4), 82).unwrap(), tr, Some(val), &cfg).unwrap();
    let best = out.log.iter().map(|l| l.val_ua.unwrap()).fold(f64::MIN, f64::max);
    assert_eq!(out.log[out.best_epoch - 1].val_ua, Some(best));
    assert_eq!(evaluate(&out.model, val).unwrap().unweighted_accuracy, best);
    assert!(out.log.len() <= 40);
}

#[test]
fn pointwise_task_is_learned_quickly() {
    let p = SynthParams {
        regime: LabelRegime::Pointwise,
        dialogs: 60,
        ..SynthParams::default()
    };
    let data = synth_dialogs(&SynthSpec::from_params(&p, 3).unwrap(), 3).unwrap().dialogs;
    let cfg = TrainConfig {
        lr: 5e-3,
        epochs: 40,
        batch_size: 10,
        patience: None,
        ..TrainConfig::default()
    };
    let out = train(Model::new(small_config(System::S5, 16, 2, 4), 4).unwrap(), &data, None, &cfg).unwrap();
    assert!(out.log.last().unwrap().train_ua >= 0.95, "{:?}", out.log.last());
    assert!(out.log.last().unwrap().train_loss < out.log[0].train_loss);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_rows_are_distributions(seed in 0u64..1000, sys in 0usize..5, len in 1usize..8) {
        let system = System::ALL[sys];
        let model = Model::new(small_config(system, 8, 2, 4), seed).unwrap();
        let d = &dialogs(4, 1, len, len, 2.0, seed)[0];
        let pred = model.predict(d).unwrap();
        for t in 0..len {
            let row = pred.probs.row_slice(t);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if let Some(alpha) = &pred.attn_weights[t] {
                prop_assert!(alpha.data().iter().all(|&a| a >= 0.0));
                prop_assert!((alpha.sum() - 1.0).abs() < 1e-12);
            }
        }
    }
}
