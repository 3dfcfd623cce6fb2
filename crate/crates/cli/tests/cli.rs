use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn convemo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convemo"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CONVEMO_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn synth(dir: &Path, dialogs: &str, extra: &[&str]) {
    let mut args = vec!["synth", "--dialogs", dialogs, "--seed", "7", "--out-dir", "data"];
    args.extend(extra);
    ok(&convemo(&args, dir));
}

const SMALL: [&str; 8] = ["--d", "8", "--heads", "2", "--epochs", "2", "--batch", "5"];

#[test]
fn synth_is_deterministic_and_overwrites_identically() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = convemo(
        &["synth", "--classes", "4", "--dialogs", "200", "--regime", "contextual", "--seed", "7"],
        p,
    );
    let summary = ok(&out);
    assert!(summary.contains("dialogs") && summary.contains("happy="));
    let first = (
        fs::read(p.join("data/train.jsonl")).unwrap(),
        fs::read(p.join("data/test.jsonl")).unwrap(),
    );
    ok(&convemo(
        &["synth", "--classes", "4", "--dialogs", "200", "--regime", "contextual", "--seed", "7"],
        p,
    ));
    assert_eq!(fs::read(p.join("data/train.jsonl")).unwrap(), first.0);
    assert_eq!(fs::read(p.join("data/test.jsonl")).unwrap(), first.1);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&convemo(&["synth", "--dialogs", "20", "--seed", "5", "--out-dir", "a"], p));
    let out = Command::new(env!("CARGO_BIN_EXE_convemo"))
        .args(["synth", "--dialogs", "20", "--out-dir", "b"])
        .current_dir(p)
        .env("CONVEMO_SEED", "5")
        .output()
        .unwrap();
    ok(&out);
    assert_eq!(
        fs::read(p.join("a/train.jsonl")).unwrap(),
        fs::read(p.join("b/train.jsonl")).unwrap()
    );
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(convemo(&["synth", "--sigma", "-1"], p).status.code(), Some(1));
    assert_eq!(convemo(&["train", "--no-such-flag"], p).status.code(), Some(1));
    assert_eq!(convemo(&["train", "--system", "S9", "--data", "x"], p).status.code(), Some(1));
    assert_eq!(convemo(&["train"], p).status.code(), Some(1));
}

#[test]
fn missing_or_malformed_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(convemo(&["train", "--data", "missing.jsonl"], p).status.code(), Some(2));
    fs::write(p.join("bad.jsonl"), "{not json\n").unwrap();
    assert_eq!(convemo(&["train", "--data", "bad.jsonl"], p).status.code(), Some(2));
}

#[test]
fn help_documents_every_flag_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = convemo(&["train", "--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8_lossy(&out.stdout);
    for flag in [
        "--system", "--data", "--val", "--seed", "--d ", "--heads", "--lr", "--batch", "--dropout", "--l2",
        "--epochs", "--patience", "--scaled-attention", "--threads", "--repeats", "--out-dir", "--config",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
    for default in ["[default: 100]", "[default: 4]", "[default: 0.0001]", "[default: 20]", "[default: 0.2]"] {
        assert!(help.contains(default), "missing {default}");
    }
}

#[test]
fn train_uses_published_defaults_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth(p, "10", &["--min-len", "2", "--max-len", "3"]);
    let out = ok(&convemo(
        &["train", "--system", "S5", "--data", "data/train.jsonl", "--seed", "1", "--epochs", "1"],
        p,
    ));
    assert!(out.contains("d=100 heads=4 lr=0.0001 batch=20 dropout=0.2"), "{out}");
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("run/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["model"]["d"], 100);
    assert_eq!(cfg["model"]["heads"], 4);
    assert_eq!(cfg["model"]["dropout_p"], 0.2);
    assert_eq!(cfg["hyper"]["train"]["lr"], 1e-4);
    assert_eq!(cfg["hyper"]["train"]["batch_size"], 20);
    for f in ["checkpoint.json", "train_log.csv", "metrics.json"] {
        assert!(p.join("run").join(f).exists(), "{f}");
    }
    let log = fs::read_to_string(p.join("run/train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,train_loss,train_ua,val_ua,seconds\n"));
    assert_eq!(log.lines().count(), 2);
}

#[test]
fn attention_only_system_disables_the_gru() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth(p, "30", &[]);
    let mut args = vec!["train", "--system", "S3", "--data", "data/train.jsonl"];
    args.extend(SMALL);
    let out = ok(&convemo(&args, p));
    assert!(out.contains("classifier=ATTN_ONLY"));
    let ckpt = fs::read_to_string(p.join("run/checkpoint.json")).unwrap();
    assert!(ckpt.contains("\"ATTN_ONLY\"") && !ckpt.contains("gru."));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth(p, "30", &[]);
    fs::write(
        p.join("cfg.json"),
        r#"{"system": "S4", "data": "data/train.jsonl", "d": 12, "heads": 3, "epochs": 1, "lr": 0.01}"#,
    )
    .unwrap();
    ok(&convemo(&["train", "--config", "cfg.json", "--lr", "0.02"], p));
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("run/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["system"], "S4");
    assert_eq!(cfg["model"]["d"], 12);
    assert_eq!(cfg["hyper"]["train"]["lr"], 0.02);
    assert_eq!(cfg["hyper"]["train"]["epochs"], 1);
}

#[test]
fn repeats_report_mean_and_std() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth(p, "30", &[]);
    let mut args = vec!["train", "--data", "data/train.jsonl", "--repeats", "3"];
    args.extend(SMALL);
    let out = ok(&convemo(&args, p));
    assert!(out.contains("over 3 runs") && out.contains('±'), "{out}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("run/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["ua"].as_array().unwrap().len(), 3);
    for r in 0..3 {
        assert!(p.join(format!("run/run{r:02}/checkpoint.json")).exists());
    }
}

#[test]
fn eval_is_deterministic_and_dumps_fusion_weights() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth(p, "30", &[]);
    let mut args = vec!["train", "--data", "data/train.jsonl"];
    args.extend(SMALL);
    ok(&convemo(&args, p));
    let eval = |out: &str| {
        ok(&convemo(
            &["eval", "--checkpoint", "run/checkpoint.json", "--data", "data/test.jsonl", "--dump-attn", "attn.csv", "--out", out],
            p,
        ))
    };
    eval("m1.json");
    eval("m2.json");
    assert_eq!(fs::read(p.join("m1.json")).unwrap(), fs::read(p.join("m2.json")).unwrap());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("m1.json")).unwrap()).unwrap();
    assert!(m["unweighted_accuracy"].as_f64().is_some() && m["confusion"].is_array());

    let mut rdr = csv::Reader::from_path(p.join("attn.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["dialog_id", "utt_index", "alpha_a", "alpha_t", "alpha_s"]);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let sum: f64 = (2..5).map(|i| rec[i].parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows as u64, m["utterances"].as_u64().unwrap());
}

#[test]
fn memorised_training_set_evaluates_to_perfect_ua() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth(p, "40", &[]);
    ok(&convemo(
        &[
            "train", "--data", "data/train.jsonl", "--d", "16", "--heads", "2", "--lr", "0.01", "--epochs", "60",
            "--batch", "8", "--dropout", "0",
        ],
        p,
    ));
    let out = ok(&convemo(&["eval", "--checkpoint", "run/checkpoint.json", "--data", "data/train.jsonl"], p));
    let m: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(m["unweighted_accuracy"], 1.0);
}

#[test]
fn ablate_reports_requested_systems_in_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth(p, "20", &["--max-len", "6"]);
    let base = ["ablate", "--train", "data/train.jsonl", "--test", "data/test.jsonl", "--epochs", "1", "--d", "8", "--heads", "2"];
    let out = ok(&convemo(&base, p));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].contains("Modalities") && lines[0].contains("Fusion") && lines[0].contains("Classifier") && lines[0].contains("UA(%)"));
    for (i, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("S{}", i + 1)), "{line}");
    }
    assert!(lines[5].contains("A+T+S") && lines[5].contains("ATS-Fusion") && lines[5].contains("SA-GRU"));

    let mut args = base.to_vec();
    args.extend(["--systems", "S3,S5", "--out", "table.csv"]);
    let out = ok(&convemo(&args, p));
    assert_eq!(out.lines().count(), 3);
    let csv = fs::read_to_string(p.join("table.csv")).unwrap();
    assert!(csv.starts_with("system,modalities,fusion,classifier,ua_mean,ua_std,runs\n"));
    assert_eq!(csv.lines().filter(|l| l.starts_with('S')).count(), 2);
}

#[test]
fn gradcheck_lists_every_tensor_and_honours_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = ok(&convemo(&["gradcheck"], p));
    let names: Vec<&str> = out
        .lines()
        .filter(|l| l.contains("max_rel_err="))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
    for prefix in ["fusion.w_a", "fusion.w_s", "fusion.w_fuse", "gru.fwd.u_h", "gru.bwd.b_z", "attn.head1.w_k", "classifier.b_out"] {
        assert!(names.contains(&prefix), "{prefix}");
    }

    let strict = convemo(&["gradcheck", "--tol", "1e-12"], p);
    assert_eq!(strict.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&strict.stdout).contains("FAIL"));
}
