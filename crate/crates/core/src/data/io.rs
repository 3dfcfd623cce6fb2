//! JSON-lines dataset format.
//!
//! Line 1 is the header `{"d_a","d_t","d_s","c","classes"}`; every further
//! non-empty line is one dialog `{"id","utts":[{"a","t","s","spk","y"}]}`.
//! Floats use shortest round-trip decimal, so save/load is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta, Dialog, UtteranceRecord};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct MetaLine {
    d_a: usize,
    d_t: usize,
    d_s: usize,
    c: usize,
    classes: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    split: String,
}

#[derive(Serialize, Deserialize)]
struct UttLine {
    a: Vec<f64>,
    t: Vec<f64>,
    s: Vec<f64>,
    spk: Option<String>,
    y: usize,
}

#[derive(Serialize, Deserialize)]
struct DialogLine {
    id: String,
    utts: Vec<UttLine>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn read_dataset(reader: impl BufRead) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate();
    let meta = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::Parse {
                line: 1,
                msg: "missing header line".into(),
            });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let header: MetaLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: format!("bad header: {e}"),
        })?;
        let class_names = if header.classes.is_empty() {
            (0..header.c).map(|k| format!("class{k}")).collect()
        } else {
            header.classes
        };
        if class_names.len() != header.c {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("c = {} but {} class names", header.c, class_names.len()),
            });
        }
        break DatasetMeta {
            d_a: header.d_a,
            d_t: header.d_t,
            d_s: header.d_s,
            class_names,
            split_tag: header.split,
        };
    };

    let mut dialogs = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: DialogLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        let dialog = Dialog {
            id: raw.id,
            utterances: raw
                .utts
                .into_iter()
                .map(|u| UtteranceRecord {
                    acoustic: u.a,
                    lexical: u.t,
                    speaker_emb: u.s,
                    speaker_tag: u.spk,
                    label: u.y,
                })
                .collect(),
        };
        meta.validate(&dialog)?;
        dialogs.push(dialog);
    }
    Ok(Dataset { meta, dialogs })
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, dataset)?;
    w.flush()?;
    Ok(())
}

pub fn write_dataset(mut w: impl Write, dataset: &Dataset) -> Result<()> {
    let meta = &dataset.meta;
    let header = MetaLine {
        d_a: meta.d_a,
        d_t: meta.d_t,
        d_s: meta.d_s,
        c: meta.num_classes(),
        classes: meta.class_names.clone(),
        split: meta.split_tag.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for d in &dataset.dialogs {
        meta.validate(d)?;
        let line = DialogLine {
            id: d.id.clone(),
            utts: d
                .utterances
                .iter()
                .map(|u| UttLine {
                    a: u.acoustic.clone(),
                    t: u.lexical.clone(),
                    s: u.speaker_emb.clone(),
                    spk: u.speaker_tag.clone(),
                    y: u.label,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SMALL: &str = r#"{"d_a":4,"d_t":3,"d_s":2,"c":4,"classes":["happy","angry","sad","neutral"]}
{"id":"ses01","utts":[{"a":[0.1,0.2,0.3,0.4],"t":[1,2,3],"s":[0.5,-0.5],"spk":"F1","y":0},{"a":[0,0,0,1e-300],"t":[-1,-2,-3],"s":[1,1],"spk":"M1","y":3}]}
"#;

    #[test]
    fn reads_small_dataset() {
        let ds = read_dataset(SMALL.as_bytes()).unwrap();
        assert_eq!(ds.meta.num_classes(), 4);
        assert_eq!(ds.dialogs.len(), 1);
        assert_eq!(ds.dialogs[0].len(), 2);
        assert_eq!(ds.dialogs[0].utterances[1].label, 3);
        assert_eq!(ds.dialogs[0].utterances[0].speaker_tag.as_deref(), Some("F1"));
    }

    #[test]
    fn out_of_range_label_names_the_dialog() {
        let bad = SMALL.replace("\"y\":3", "\"y\":7");
        let err = read_dataset(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("ses01"), "{err}");
    }

    #[test]
    fn dim_mismatch_names_dialog_and_dims() {
        let bad = SMALL.replace("\"t\":[1,2,3]", "\"t\":[1,2]");
        let err = read_dataset(bad.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("ses01") && err.contains("expected 3") && err.contains("got 2"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let bad = format!("{SMALL}{{\"id\": oops}}\n");
        match read_dataset(bad.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_dialog_is_rejected() {
        let bad = format!("{SMALL}{{\"id\":\"empty\",\"utts\":[]}}\n");
        assert!(read_dataset(bad.as_bytes()).unwrap_err().to_string().contains("empty"));
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        let float = prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3f64..1e3];
        let utt = (
            prop::collection::vec(float.clone(), 3),
            prop::collection::vec(float.clone(), 2),
            prop::collection::vec(float, 1),
            prop::option::of("[a-z]{1,4}"),
            0usize..3,
        )
            .prop_map(|(a, t, s, spk, y)| UtteranceRecord {
                acoustic: a,
                lexical: t,
                speaker_emb: s,
                speaker_tag: spk,
                label: y,
            });
        prop::collection::vec(prop::collection::vec(utt, 1..4), 0..4).prop_map(|ds| Dataset {
            meta: DatasetMeta {
                d_a: 3,
                d_t: 2,
                d_s: 1,
                class_names: vec!["x".into(), "y".into(), "z".into()],
                split_tag: String::new(),
            },
            dialogs: ds
                .into_iter()
                .enumerate()
                .map(|(i, utterances)| Dialog {
                    id: format!("d{i}"),
                    utterances,
                })
                .collect(),
        })
    }

    proptest! {
        #[test]
        fn save_load_is_bit_exact(ds in arb_dataset()) {
            let mut buf = Vec::new();
            write_dataset(&mut buf, &ds).unwrap();
            let back = read_dataset(buf.as_slice()).unwrap();
            for (a, b) in ds.dialogs.iter().zip(&back.dialogs) {
                for (ua, ub) in a.utterances.iter().zip(&b.utterances) {
                    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                    prop_assert_eq!(bits(&ua.acoustic), bits(&ub.acoustic));
                    prop_assert_eq!(bits(&ua.lexical), bits(&ub.lexical));
                    prop_assert_eq!(bits(&ua.speaker_emb), bits(&ub.speaker_emb));
                }
            }
            prop_assert_eq!(back, ds);
        }
    }
}
