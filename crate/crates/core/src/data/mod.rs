//! Dialog datasets: schema, JSON-lines I/O, synthetic generation and splitting.

mod io;
mod split;
mod synth;

pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use split::split_by_dialog;
pub use synth::{synth_dialogs, LabelRegime, SynthParams, SynthSpec};

use crate::error::{Error, Result};

/// Four-class label set: happy (merged with excited), angry, sad, neutral.
pub const EMOTION_CLASSES: [&str; 4] = ["happy", "angry", "sad", "neutral"];

/// Feature dimensions of the reference extractors: IS13-ComParE acoustic
/// functionals, mean-pooled ELMo word vectors and x-vector speaker embeddings.
pub const REFERENCE_DIMS: (usize, usize, usize) = (6373, 1024, 512);

/// One utterance with precomputed per-modality features.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub acoustic: Vec<f64>,
    pub lexical: Vec<f64>,
    pub speaker_emb: Vec<f64>,
    pub speaker_tag: Option<String>,
    pub label: usize,
}

/// Ordered utterances of one conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dialog {
    pub id: String,
    pub utterances: Vec<UtteranceRecord>,
}

impl Dialog {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.utterances.iter().map(|u| u.label).collect()
    }

    /// Same dialog with utterances reordered so that new position `i` holds old utterance `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Dialog {
        Dialog {
            id: self.id.clone(),
            utterances: perm.iter().map(|&i| self.utterances[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub d_a: usize,
    pub d_t: usize,
    pub d_s: usize,
    pub class_names: Vec<String>,
    pub split_tag: String,
}

impl DatasetMeta {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Checks one dialog against the declared dimensions and class count.
    pub fn validate(&self, dialog: &Dialog) -> Result<()> {
        if dialog.utterances.is_empty() {
            return Err(Error::data(&dialog.id, "dialog has no utterances"));
        }
        let c = self.num_classes();
        for (i, u) in dialog.utterances.iter().enumerate() {
            for (name, v, want) in [
                ("acoustic", &u.acoustic, self.d_a),
                ("lexical", &u.lexical, self.d_t),
                ("speaker", &u.speaker_emb, self.d_s),
            ] {
                if v.len() != want {
                    return Err(Error::data(
                        &dialog.id,
                        format!("utterance {i}: {name} dim expected {want}, got {}", v.len()),
                    ));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::data(
                        &dialog.id,
                        format!("utterance {i}: non-finite {name} feature"),
                    ));
                }
            }
            if u.label >= c {
                return Err(Error::data(
                    &dialog.id,
                    format!("utterance {i}: label {} outside {c} classes", u.label),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub dialogs: Vec<Dialog>,
}

impl Dataset {
    pub fn num_utterances(&self) -> usize {
        self.dialogs.iter().map(Dialog::len).sum()
    }

    /// Utterance count per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.meta.num_classes()];
        for d in &self.dialogs {
            for u in &d.utterances {
                counts[u.label] += 1;
            }
        }
        counts
    }

    pub fn with_dialogs(&self, dialogs: Vec<Dialog>, split_tag: &str) -> Dataset {
        Dataset {
            meta: DatasetMeta {
                split_tag: split_tag.to_string(),
                ..self.meta.clone()
            },
            dialogs,
        }
    }
}
